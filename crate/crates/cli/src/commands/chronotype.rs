//! `circadia chronotype`: MEQ prediction from acrophases (single and top-k
//! multiple regressions with VIF and omnibus diagnostics), chronotype group
//! comparisons, PCA biplot data and pairwise correlation matrices.

use std::path::Path;

use anyhow::{bail, Result};

use circadia_core::chronotype::{
    self, classify_chronotype, ChronotypeGroup, Controls, Feature, RegressionModel,
};
use circadia_core::stats;

use crate::config::RunConfig;
use crate::pipeline::{self, FEATURE_SIGNALS};
use crate::summary::{fmt, write_output, RunSummary};

/// One participant row of the chronotype analysis.
struct Row {
    id: String,
    meq: f64,
    group: ChronotypeGroup,
    acrophases: Vec<f64>, // FEATURE_SIGNALS order
    age: Option<f64>,
    sex: Option<u8>,
}

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    super::ensure_out_dir(out)?;
    let (manifest, manifest_path) = super::load_manifest(config)?;
    let mut summary = RunSummary::new("chronotype", config);
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

    // Complete-case rows: a participant enters the models only with an MEQ
    // score and an acrophase for every feature signal.
    let mut rows: Vec<Row> = Vec::new();
    for o in &outputs {
        let Some(meq) = &o.meq else {
            summary.add_notice(format!("{}: excluded (no MEQ score)", o.id));
            continue;
        };
        let acros: Option<Vec<f64>> = FEATURE_SIGNALS
            .iter()
            .map(|s| o.metrics.get(*s).and_then(|m| m.acrophase_hours))
            .collect();
        match acros {
            Some(acrophases) => rows.push(Row {
                id: o.id.clone(),
                meq: meq.score,
                group: classify_chronotype(meq.score),
                acrophases,
                age: o.age,
                sex: o.sex,
            }),
            None => summary.add_notice(format!(
                "{}: excluded (missing acrophase for at least one feature signal)",
                o.id
            )),
        }
    }
    if rows.len() < 9 {
        bail!(
            "chronotype analysis needs at least 9 complete participants, found {}",
            rows.len()
        );
    }

    let y: Vec<f64> = rows.iter().map(|r| r.meq).collect();
    let feature = |name: &str| -> Feature {
        let idx = FEATURE_SIGNALS.iter().position(|s| *s == name).unwrap();
        Feature::new(name, rows.iter().map(|r| r.acrophases[idx]).collect())
    };
    let controls: Option<Controls> =
        if rows.iter().all(|r| r.age.is_some() && r.sex.is_some()) {
            Some(Controls {
                age: rows.iter().map(|r| r.age.unwrap()).collect(),
                sex: rows.iter().map(|r| r.sex.unwrap() as f64).collect(),
            })
        } else {
            None
        };

    // Models 1..=7: single predictors. Models 8..=12: exhaustive top-k over
    // the consumer signals (the reference signal is excluded).
    #[derive(serde::Serialize)]
    struct ModelReport {
        model: usize,
        kind: &'static str,
        features: Vec<String>,
        #[serde(flatten)]
        fit: RegressionModel,
    }
    let mut reports: Vec<ModelReport> = Vec::new();
    let mut model_id = 0usize;
    for name in FEATURE_SIGNALS {
        model_id += 1;
        match chronotype::fit_ols(&y, &[feature(name)], None) {
            Ok(fit) => reports.push(ModelReport {
                model: model_id,
                kind: "single",
                features: vec![name.to_string()],
                fit,
            }),
            Err(e) => summary.add_notice(format!("model {model_id} ({name}): {e}")),
        }
    }
    let consumer: Vec<Feature> = FEATURE_SIGNALS
        .iter()
        .filter(|s| **s != config.reference_signal)
        .map(|s| feature(s))
        .collect();
    let mut best_k_fitted: Option<Vec<f64>> = None;
    for k in 2..=6usize.min(consumer.len()) {
        model_id += 1;
        match chronotype::select_top_k(&y, &consumer, k) {
            Ok(sel) => {
                best_k_fitted = Some(sel.model.fitted.clone());
                reports.push(ModelReport {
                    model: model_id,
                    kind: "multiple",
                    features: sel.feature_names,
                    fit: sel.model,
                });
            }
            Err(e) => summary.add_notice(format!("model {model_id} (top-{k}): {e}")),
        }
    }
    // Sensitivity re-fits with age and sex controls, reported separately.
    if let Some(c) = &controls {
        for name in FEATURE_SIGNALS {
            match chronotype::fit_ols(&y, &[feature(name)], Some(c)) {
                Ok(fit) => reports.push(ModelReport {
                    model: reports.len() + 1,
                    kind: "sensitivity",
                    features: vec![name.to_string()],
                    fit,
                }),
                Err(e) => summary.add_notice(format!("sensitivity ({name}): {e}")),
            }
        }
    } else {
        summary.add_notice(
            "sensitivity models skipped (age/sex not present for all participants)",
        );
    }
    write_output(
        &mut summary,
        out,
        "regression_models.json",
        &(serde_json::to_string_pretty(&reports).expect("serializes") + "\n"),
    )?;

    // Participant table.
    let mut groups_csv = String::from("participant,meq,group,");
    groups_csv.push_str(
        &FEATURE_SIGNALS
            .iter()
            .map(|s| format!("acrophase_{s}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    groups_csv.push('\n');
    for r in &rows {
        groups_csv.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            fmt(r.meq),
            r.group.name(),
            r.acrophases
                .iter()
                .map(|a| fmt(*a))
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    write_output(&mut summary, out, "groups.csv", &groups_csv)?;

    // Group comparisons per feature signal.
    let group_table = group_stats(&rows, &mut summary)?;
    write_output(&mut summary, out, "group_stats.csv", &group_table)?;

    // PCA biplot over all feature acrophases, labeled by MEQ.
    let all_features: Vec<Feature> = FEATURE_SIGNALS.iter().map(|s| feature(s)).collect();
    match chronotype::pca_biplot_data(&all_features, &y) {
        Ok(p) => {
            let mut scores = String::from("participant,pc1,pc2,meq\n");
            for (i, r) in rows.iter().enumerate() {
                scores.push_str(&format!(
                    "{},{},{},{}\n",
                    r.id,
                    fmt(p.scores[i][0]),
                    fmt(p.scores[i][1]),
                    fmt(r.meq)
                ));
            }
            write_output(&mut summary, out, "biplot_scores.csv", &scores)?;
            let mut loadings = String::from("feature,pc1,pc2\n");
            for (j, name) in p.feature_names.iter().enumerate() {
                loadings.push_str(&format!(
                    "{},{},{}\n",
                    name,
                    fmt(p.loadings[j][0]),
                    fmt(p.loadings[j][1])
                ));
            }
            write_output(&mut summary, out, "biplot_loadings.csv", &loadings)?;
            let mut var = String::from("pc,explained_variance\n");
            for (i, v) in p.explained_variance.iter().enumerate() {
                var.push_str(&format!("{},{}\n", i + 1, fmt(*v)));
            }
            write_output(&mut summary, out, "pca_variance.csv", &var)?;
        }
        Err(e) => summary.add_notice(format!("pca: {e}")),
    }

    // Pairwise correlations among features and the best multi-model's
    // predicted MEQ.
    let mut corr_features: Vec<Feature> = all_features.clone();
    match &best_k_fitted {
        Some(fitted) => corr_features.push(Feature::new("meq_pred", fitted.clone())),
        None => summary.add_notice("correlation matrix: no multiple model available"),
    }
    let mut corr = String::from("a,b,r,p,n\n");
    for i in 0..corr_features.len() {
        for j in (i + 1)..corr_features.len() {
            match stats::pearson(&corr_features[i].values, &corr_features[j].values) {
                Ok(t) => corr.push_str(&format!(
                    "{},{},{},{},{}\n",
                    corr_features[i].name,
                    corr_features[j].name,
                    fmt(t.statistic),
                    fmt(t.p_value),
                    t.n[0]
                )),
                Err(e) => summary.add_notice(format!(
                    "correlation {} vs {}: {e}",
                    corr_features[i].name, corr_features[j].name
                )),
            }
        }
    }
    write_output(&mut summary, out, "correlations.csv", &corr)?;

    super::write_plots(
        &mut summary,
        out,
        vec![
            super::PlotDescriptor {
                name: "pca_biplot".into(),
                kind: "biplot".into(),
                data: "biplot_scores.csv".into(),
                x: "pc1".into(),
                y: vec!["pc2".into()],
                group_by: Some("meq".into()),
            },
            super::PlotDescriptor {
                name: "pairwise_correlations".into(),
                kind: "correlation_matrix".into(),
                data: "correlations.csv".into(),
                x: "a".into(),
                y: vec!["b".into()],
                group_by: None,
            },
        ],
    )?;
    summary.write(out)?;
    eprintln!(
        "[circadia] chronotype analysis over {} participants written to {}",
        rows.len(),
        out.display()
    );
    Ok(())
}

/// Group medians/IQRs per feature plus Kruskal-Wallis and pairwise rank-sum
/// tests. Comparisons touching a group smaller than 3 are skipped with a
/// notice.
fn group_stats(rows: &[Row], summary: &mut RunSummary) -> Result<String> {
    let mut csv = String::from(
        "signal,evening_median,evening_iqr,intermediate_median,intermediate_iqr,\
         morning_median,morning_iqr,kw_h,kw_p,z_e_i,p_e_i,z_i_m,p_i_m,z_e_m,p_e_m\n",
    );
    let groups = [
        ChronotypeGroup::Evening,
        ChronotypeGroup::Intermediate,
        ChronotypeGroup::Morning,
    ];
    for (idx, signal) in FEATURE_SIGNALS.iter().enumerate() {
        let by_group: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                rows.iter()
                    .filter(|r| r.group == *g)
                    .map(|r| r.acrophases[idx])
                    .collect()
            })
            .collect();
        let mut cells: Vec<String> = vec![signal.to_string()];
        for g in &by_group {
            match pipeline::median_iqr(g) {
                Some((med, iqr)) => {
                    cells.push(fmt(med));
                    cells.push(fmt(iqr));
                }
                None => {
                    cells.push(String::new());
                    cells.push(String::new());
                }
            }
        }
        let enough = |i: usize| by_group[i].len() >= 3;
        if enough(0) && enough(1) && enough(2) {
            match stats::kruskal_wallis(&[&by_group[0], &by_group[1], &by_group[2]]) {
                Ok(t) => {
                    cells.push(fmt(t.statistic));
                    cells.push(fmt(t.p_value));
                }
                Err(e) => {
                    summary.add_notice(format!("{signal}: kruskal_wallis: {e}"));
                    cells.push(String::new());
                    cells.push(String::new());
                }
            }
        } else {
            summary.add_notice(format!(
                "{signal}: group comparison skipped (a group has fewer than 3 members)"
            ));
            cells.push(String::new());
            cells.push(String::new());
        }
        for (a, b) in [(0usize, 1usize), (1, 2), (0, 2)] {
            if enough(a) && enough(b) {
                match stats::wilcoxon_rank_sum(&by_group[a], &by_group[b]) {
                    Ok(t) => {
                        cells.push(fmt(t.statistic));
                        cells.push(fmt(t.p_value));
                    }
                    Err(e) => {
                        summary.add_notice(format!(
                            "{signal}: rank-sum {} vs {}: {e}",
                            groups[a].name(),
                            groups[b].name()
                        ));
                        cells.push(String::new());
                        cells.push(String::new());
                    }
                }
            } else {
                summary.add_notice(format!(
                    "{signal}: rank-sum {} vs {} skipped (group smaller than 3)",
                    groups[a].name(),
                    groups[b].name()
                ));
                cells.push(String::new());
                cells.push(String::new());
            }
        }
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    Ok(csv)
}
