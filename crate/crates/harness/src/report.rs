//! CSV and plain-text reports, computed only from run records.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ReportSection;
use crate::error::{io_err, Result};
use crate::experiment::{sort_records, RunRecord};
use crate::metrics::Histogram;

pub const REWARD_CURVES: &str = "reward_curves.csv";
pub const ACTION_HISTOGRAMS: &str = "action_histograms.csv";
pub const COST_BREAKDOWN: &str = "cost_breakdown.csv";
pub const COMPARISON: &str = "comparison.csv";
pub const SUMMARY: &str = "summary.txt";

/// The learned controller whose costs go into the cost breakdown table.
fn primary(records: &[&RunRecord]) -> Option<usize> {
    ["sac", "td3", "rule", "random"]
        .iter()
        .find_map(|name| records.iter().position(|r| r.controller == *name && r.eval.is_some()))
}

fn histogram_rows(out: &mut String, r: &RunRecord, command: &str, h: &Histogram) {
    for (i, count) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(i);
        let _ = writeln!(out, "{},{},{command},{lo},{hi},{count}", r.scenario, r.controller);
    }
}

/// Writes the enabled reports into `dir` and returns the files written.
pub fn emit_reports(records: &[RunRecord], dir: &Path, toggles: &ReportSection) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut records = records.to_vec();
    sort_records(&mut records);
    let mut files: Vec<(&str, String)> = Vec::new();

    if !records.is_empty() {
        if toggles.reward_curves && records.iter().any(|r| r.train_log.is_some()) {
            let mut s = String::from("scenario,controller,episode,day,return,operational_cost_usd\n");
            for r in &records {
                for e in r.train_log.iter().flat_map(|l| &l.episodes) {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{}",
                        r.scenario, r.controller, e.episode, e.day, e.episode_return, e.operational_cost_usd
                    );
                }
            }
            files.push((REWARD_CURVES, s));
        }

        let evaluated: Vec<&RunRecord> = records.iter().filter(|r| r.eval.is_some()).collect();
        if toggles.action_histograms && !evaluated.is_empty() {
            let mut s = String::from("scenario,controller,command,bin_lo,bin_hi,count\n");
            for r in &evaluated {
                let h = &r.eval.as_ref().unwrap().histogram;
                histogram_rows(&mut s, r, "bess_net", &h.bess_net);
                histogram_rows(&mut s, r, "grid", &h.grid);
            }
            files.push((ACTION_HISTOGRAMS, s));
        }

        if toggles.cost_breakdown && !evaluated.is_empty() {
            let mut s =
                String::from("scenario,controller,operation_usd,degradation_usd,capital_amortized_usd,total_usd\n");
            let mut scenarios: Vec<_> = evaluated.iter().map(|r| r.scenario).collect();
            scenarios.dedup();
            for id in scenarios {
                let group: Vec<&RunRecord> = evaluated.iter().copied().filter(|r| r.scenario == id).collect();
                if let Some(i) = primary(&group) {
                    let c = group[i].eval.as_ref().unwrap().breakdown;
                    let _ = writeln!(
                        s,
                        "{id},{},{},{},{},{}",
                        group[i].controller, c.operation_usd, c.degradation_usd, c.capital_amortized_usd, c.total_usd
                    );
                }
            }
            files.push((COST_BREAKDOWN, s));
        }

        if toggles.comparison && !evaluated.is_empty() {
            let mut s = String::from("scenario,controller,mean_return,cash_cost_usd,total_cost_usd,soc_violations\n");
            for r in &evaluated {
                let e = r.eval.as_ref().unwrap();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.scenario, r.controller, e.mean_return, e.cash_cost_usd, e.breakdown.total_usd, e.soc_violations
                );
            }
            files.push((COMPARISON, s));
        }
    }

    files.push((SUMMARY, summary(&records)));
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

fn summary(records: &[RunRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "runs: {}", records.len());
    if records.is_empty() {
        let _ = writeln!(s, "no runs found; no data files written");
        return s;
    }
    let mut scenarios: Vec<_> = records.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    for id in scenarios {
        let _ = writeln!(s, "\n[{id}]");
        let group: Vec<&RunRecord> = records.iter().filter(|r| r.scenario == id).collect();
        for r in &group {
            let _ = match &r.eval {
                Some(e) => writeln!(
                    s,
                    "{:<8} return {:>12.4}  cash ${:>10.2}  total ${:>10.2}  soc violations {}",
                    r.controller, e.mean_return, e.cash_cost_usd, e.breakdown.total_usd, e.soc_violations
                ),
                None => writeln!(s, "{:<8} not evaluated", r.controller),
            };
        }
        let find = |name: &str| {
            group
                .iter()
                .find(|r| r.controller == name)
                .and_then(|r| r.eval.as_ref())
        };
        if let (Some(sac), Some(td3)) = (find("sac"), find("td3")) {
            let by_return = if sac.mean_return >= td3.mean_return {
                "sac"
            } else {
                "td3"
            };
            let by_cost = if sac.cash_cost_usd <= td3.cash_cost_usd {
                "sac"
            } else {
                "td3"
            };
            let _ = writeln!(s, "higher return: {by_return}; lower cash cost: {by_cost}");
        }
    }
    s
}
