//! `circadia metrics`: the eight rhythm metrics per participant and signal,
//! cohort summary statistics against the reference signal, miss rates and
//! alignment reports.

use std::path::Path;

use anyhow::Result;

use circadia_core::stats;

use crate::config::RunConfig;
use crate::pipeline::{self, ParticipantOutput, METRICS, SIGNALS};
use crate::summary::{fmt, fmt_opt, write_output, RunSummary};

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    super::ensure_out_dir(out)?;
    let (manifest, manifest_path) = super::load_manifest(config)?;
    let mut summary = RunSummary::new("metrics", config);
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

    write_output(&mut summary, out, "rhythm_metrics.csv", &long_metrics(&outputs))?;
    write_output(
        &mut summary,
        out,
        "table1.csv",
        &cohort_table(&outputs, config)?,
    )?;
    write_output(&mut summary, out, "miss_rates.csv", &miss_rates(&outputs))?;
    write_output(&mut summary, out, "alignment.csv", &alignment(&outputs))?;
    super::write_plots(
        &mut summary,
        out,
        vec![super::PlotDescriptor {
            name: "rhythm_metrics_by_signal".into(),
            kind: "long_table".into(),
            data: "rhythm_metrics.csv".into(),
            x: "signal".into(),
            y: vec!["value".into()],
            group_by: Some("metric".into()),
        }],
    )?;
    summary.write(out)?;
    eprintln!(
        "[circadia] metrics written for {} participants to {}",
        outputs.len(),
        out.display()
    );
    Ok(())
}

fn long_metrics(outputs: &[ParticipantOutput]) -> String {
    let mut csv = String::from("participant,signal,metric,value\n");
    for o in outputs {
        for signal in SIGNALS {
            let Some(m) = o.metrics.get(signal) else {
                continue;
            };
            for metric in METRICS {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    o.id,
                    signal,
                    metric,
                    fmt_opt(pipeline::metric_value(m, metric))
                ));
            }
        }
    }
    csv
}

/// Cohort summary mirroring the published layout: per metric and signal the
/// cohort median (IQR), plus Pearson r with p and the signed-rank p against
/// the reference signal.
fn cohort_table(outputs: &[ParticipantOutput], config: &RunConfig) -> Result<String> {
    let reference = config.reference_signal.as_str();
    let mut csv = String::from("metric,stat,");
    csv.push_str(&SIGNALS.join(","));
    csv.push('\n');

    for metric in METRICS {
        let column = |signal: &str| -> Vec<(usize, f64)> {
            outputs
                .iter()
                .enumerate()
                .filter_map(|(i, o)| {
                    o.metrics
                        .get(signal)
                        .and_then(|m| pipeline::metric_value(m, metric))
                        .map(|v| (i, v))
                })
                .collect()
        };
        let ref_col = column(reference);

        let mut medians = Vec::new();
        let mut iqrs = Vec::new();
        let mut rs = Vec::new();
        let mut r_ps = Vec::new();
        let mut wst_ps = Vec::new();
        for signal in SIGNALS {
            let col = column(signal);
            let values: Vec<f64> = col.iter().map(|(_, v)| *v).collect();
            match pipeline::median_iqr(&values) {
                Some((med, iqr)) => {
                    medians.push(fmt(med));
                    iqrs.push(fmt(iqr));
                }
                None => {
                    medians.push(String::new());
                    iqrs.push(String::new());
                }
            }
            if signal == reference {
                rs.push(String::new());
                r_ps.push(String::new());
                wst_ps.push(String::new());
                continue;
            }
            // Pair on participants with both values defined.
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, v) in &col {
                if let Some((_, rv)) = ref_col.iter().find(|(j, _)| j == i) {
                    a.push(*v);
                    b.push(*rv);
                }
            }
            match stats::pearson(&a, &b) {
                Ok(t) => {
                    rs.push(fmt(t.statistic));
                    r_ps.push(fmt(t.p_value));
                }
                Err(_) => {
                    rs.push(String::new());
                    r_ps.push(String::new());
                }
            }
            match stats::wilcoxon_signed_rank_with(&a, &b, config.exact_test_threshold) {
                Ok(t) => wst_ps.push(fmt(t.p_value)),
                Err(_) => wst_ps.push(String::new()),
            }
        }
        for (stat, cells) in [
            ("median", medians),
            ("iqr", iqrs),
            ("r", rs),
            ("r_p", r_ps),
            ("p_wst", wst_ps),
        ] {
            csv.push_str(&format!("{metric},{stat},{}\n", cells.join(",")));
        }
    }
    Ok(csv)
}

fn miss_rates(outputs: &[ParticipantOutput]) -> String {
    let mut csv = String::from("participant,signal,miss_rate\n");
    for o in outputs {
        for signal in SIGNALS {
            if let Some(rate) = o.miss_rates.get(signal) {
                csv.push_str(&format!("{},{},{}\n", o.id, signal, fmt(*rate)));
            }
        }
    }
    csv
}

fn alignment(outputs: &[ParticipantOutput]) -> String {
    let mut csv = String::from(
        "participant,n_epochs,n_valid,fraction_removed,fraction_masked,fraction_single\n",
    );
    for o in outputs {
        if let Some(r) = &o.align_report {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                o.id,
                r.n_epochs,
                r.n_valid,
                fmt(r.fraction_removed),
                fmt(r.fraction_masked),
                fmt(r.fraction_single)
            ));
        }
    }
    csv
}
