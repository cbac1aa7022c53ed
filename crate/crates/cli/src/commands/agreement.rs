//! `circadia agreement`: per-participant correlation and Bland-Altman
//! agreement between two signals, plus the pooled repeated-measures
//! correlation. Defaults to watch counts vs reference counts on the aligned
//! minute grid.

use std::path::Path;

use anyhow::{bail, Result};

use circadia_core::stats;

use crate::config::RunConfig;
use crate::pipeline::{self, ParticipantOutput};
use crate::summary::{fmt, write_output, RunSummary};

pub fn run(config: &RunConfig, out: &Path, signal_a: &str, signal_b: &str) -> Result<()> {
    super::ensure_out_dir(out)?;
    let (manifest, manifest_path) = super::load_manifest(config)?;
    let mut summary = RunSummary::new("agreement", config);
    let base = manifest_path
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    summary.add_input(&manifest_path, &base)?;

    let outputs = pipeline::process_cohort(&manifest, &manifest_path, config)?;
    for o in &outputs {
        for f in &o.input_files {
            summary.add_input(f, &base)?;
        }
        for n in &o.notices {
            summary.add_notice(n.clone());
        }
    }

    let counts_mode = (signal_a, signal_b) == ("watch_ac", "acti_ac")
        || (signal_a, signal_b) == ("acti_ac", "watch_ac");

    let mut pairs_csv = String::from("participant,t_unix_ms,a,b\n");
    let mut per_csv = String::from("participant,n,r,p,bias,loa_lo,loa_hi\n");
    let mut rs: Vec<f64> = Vec::new();
    let mut pooled: Vec<(usize, f64, f64)> = Vec::new();
    let mut n_with_pairs = 0usize;

    for (subject, o) in outputs.iter().enumerate() {
        let pairs = participant_pairs(o, signal_a, signal_b, counts_mode);
        if pairs.is_empty() {
            summary.add_notice(format!(
                "{}: no overlapping {signal_a}/{signal_b} data",
                o.id
            ));
            continue;
        }
        n_with_pairs += 1;
        let a: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        for (t, x, y) in &pairs {
            pairs_csv.push_str(&format!(
                "{},{},{},{}\n",
                o.id,
                (*t * 1000.0).round() as i64,
                fmt(*x),
                fmt(*y)
            ));
            pooled.push((subject, *x, *y));
        }
        let (r_txt, p_txt) = match stats::pearson(&a, &b) {
            Ok(t) => {
                rs.push(t.statistic);
                (fmt(t.statistic), fmt(t.p_value))
            }
            Err(e) => {
                summary.add_notice(format!("{}: pearson: {e}", o.id));
                (String::new(), String::new())
            }
        };
        match stats::bland_altman(&a, &b) {
            Ok(ba) => per_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                o.id,
                a.len(),
                r_txt,
                p_txt,
                fmt(ba.bias),
                fmt(ba.loa_lo),
                fmt(ba.loa_hi)
            )),
            Err(e) => summary.add_notice(format!("{}: bland_altman: {e}", o.id)),
        }
    }
    if n_with_pairs == 0 {
        bail!("no participant has overlapping {signal_a} and {signal_b} data");
    }

    #[derive(serde::Serialize)]
    struct AgreementSummary {
        signal_a: String,
        signal_b: String,
        n_participants: usize,
        mean_r: Option<f64>,
        sd_r: Option<f64>,
        rm_corr: Option<stats::TestResult>,
    }
    let mean_r = if rs.is_empty() {
        None
    } else {
        Some(rs.iter().sum::<f64>() / rs.len() as f64)
    };
    let sd_r = if rs.len() > 1 {
        let m = mean_r.unwrap();
        Some(
            (rs.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (rs.len() as f64 - 1.0)).sqrt(),
        )
    } else {
        None
    };
    let rm = match stats::rm_corr(&pooled) {
        Ok(t) => Some(t),
        Err(e) => {
            summary.add_notice(format!("rm_corr: {e}"));
            None
        }
    };
    let agreement = AgreementSummary {
        signal_a: signal_a.to_string(),
        signal_b: signal_b.to_string(),
        n_participants: n_with_pairs,
        mean_r,
        sd_r,
        rm_corr: rm,
    };
    write_output(
        &mut summary,
        out,
        "agreement_summary.json",
        &(serde_json::to_string_pretty(&agreement).expect("serializes") + "\n"),
    )?;
    write_output(&mut summary, out, "agreement_participants.csv", &per_csv)?;
    write_output(&mut summary, out, "agreement_pairs.csv", &pairs_csv)?;
    super::write_plots(
        &mut summary,
        out,
        vec![
            super::PlotDescriptor {
                name: "scatter_ab".into(),
                kind: "scatter".into(),
                data: "agreement_pairs.csv".into(),
                x: "a".into(),
                y: vec!["b".into()],
                group_by: Some("participant".into()),
            },
            super::PlotDescriptor {
                name: "bland_altman".into(),
                kind: "bland_altman".into(),
                data: "agreement_pairs.csv".into(),
                x: "mean(a,b)".into(),
                y: vec!["a-b".into()],
                group_by: Some("participant".into()),
            },
        ],
    )?;
    summary.write(out)?;
    eprintln!(
        "[circadia] agreement over {n_with_pairs} participants written to {}",
        out.display()
    );
    Ok(())
}

/// Valid paired samples of the two signals for one participant.
fn participant_pairs(
    o: &ParticipantOutput,
    signal_a: &str,
    signal_b: &str,
    counts_mode: bool,
) -> Vec<(f64, f64, f64)> {
    if counts_mode {
        let Some((w, r)) = &o.aligned_counts else {
            return Vec::new();
        };
        let (first, second) = if signal_a == "watch_ac" { (w, r) } else { (r, w) };
        return (0..first.len())
            .filter_map(|i| match (first.value(i), second.value(i)) {
                (Some(x), Some(y)) => Some((first.epoch_start(i), x, y)),
                _ => None,
            })
            .collect();
    }
    let (Some(a), Some(b)) = (o.signals.get(signal_a), o.signals.get(signal_b)) else {
        return Vec::new();
    };
    match circadia_core::ingest::align_series(a, b, &[]) {
        Ok((aa, ab, _)) => (0..aa.len())
            .filter_map(|i| match (aa.value(i), ab.value(i)) {
                (Some(x), Some(y)) => Some((aa.epoch_start(i), x, y)),
                _ => None,
            })
            .collect(),
        Err(_) => Vec::new(),
    }
}
