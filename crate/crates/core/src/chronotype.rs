//! Chronotype scoring and prediction: MEQ averaging, group classification,
//! linear regression with diagnostics, exhaustive top-k feature selection
//! and PCA biplot data.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special;
use crate::stats;

/// Chronotype categories by MEQ score. Boundary scores (exactly 42 or 58)
/// fall into Intermediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
pub enum ChronotypeGroup {
    Evening,
    Intermediate,
    Morning,
}

impl ChronotypeGroup {
    pub fn name(self) -> &'static str {
        match self {
            ChronotypeGroup::Evening => "evening",
            ChronotypeGroup::Intermediate => "intermediate",
            ChronotypeGroup::Morning => "morning",
        }
    }
}

/// Classifies an MEQ score: below 42 Evening, above 58 Morning, otherwise
/// Intermediate.
pub fn classify_chronotype(score: f64) -> ChronotypeGroup {
    if score < 42.0 {
        ChronotypeGroup::Evening
    } else if score > 58.0 {
        ChronotypeGroup::Morning
    } else {
        ChronotypeGroup::Intermediate
    }
}

/// An averaged MEQ score with its underlying administrations.
#[derive(Debug, Clone, Serialize)]
pub struct MeqScore {
    pub participant: String,
    pub score: f64,
    pub administrations: Vec<(u32, f64)>,
}

impl MeqScore {
    /// Builds the score as the arithmetic mean of `(day, score)`
    /// administrations.
    pub fn from_administrations(
        participant: impl Into<String>,
        administrations: Vec<(u32, f64)>,
    ) -> Result<MeqScore> {
        if administrations.is_empty() {
            return Err(Error::InsufficientData(
                "MEQ requires at least one administration".into(),
            ));
        }
        let score =
            administrations.iter().map(|(_, s)| s).sum::<f64>() / administrations.len() as f64;
        Ok(MeqScore {
            participant: participant.into(),
            score,
            administrations,
        })
    }
}

/// A named regression feature column.
#[derive(Debug, Clone)]
pub struct Feature {
    pub name: String,
    pub values: Vec<f64>,
}

impl Feature {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Feature {
        Feature {
            name: name.into(),
            values,
        }
    }
}

/// One fitted coefficient with inference.
#[derive(Debug, Clone, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    pub t: f64,
    pub p_value: f64,
}

/// Residual-normality verdict from the omnibus K² test. The flag reports;
/// it never blocks fitting.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalityVerdict {
    pub k2: f64,
    pub p_value: f64,
    pub normal: bool,
}

/// Ordinary-least-squares model with the diagnostics the analysis tables
/// report: coefficient CIs, F statistic, R², adjusted R², per-feature VIF
/// for multiple models, and a residual-normality verdict.
#[derive(Debug, Clone, Serialize)]
pub struct RegressionModel {
    pub intercept: Coefficient,
    pub coefficients: Vec<Coefficient>,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub df_model: usize,
    pub df_resid: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vif: Option<Vec<(String, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_normality: Option<NormalityVerdict>,
    pub n: usize,
    /// Fitted values, for downstream correlation plots.
    #[serde(skip)]
    pub fitted: Vec<f64>,
}

/// Optional demographic control columns for sensitivity models.
#[derive(Debug, Clone)]
pub struct Controls {
    pub age: Vec<f64>,
    /// 0 female, 1 male.
    pub sex: Vec<f64>,
}

/// Detects exactly collinear columns by modified Gram-Schmidt; returns the
/// names of columns that add no independent direction.
fn collinear_columns(features: &[Feature], n: usize) -> Vec<String> {
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut bad = Vec::new();
    for f in features {
        let mut v = f.values.clone();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-10 * norm0.max(1.0) {
            bad.push(f.name.clone());
        } else {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    bad
}

/// Fits y on the given features (plus optional age/sex controls) with an
/// intercept. 95% CIs use the t distribution on n − p − 1 degrees of
/// freedom; the omnibus K² verdict is attached when the sample is large
/// enough for it.
pub fn fit_ols(
    y: &[f64],
    features: &[Feature],
    controls: Option<&Controls>,
) -> Result<RegressionModel> {
    let mut cols: Vec<Feature> = features.to_vec();
    if let Some(c) = controls {
        cols.push(Feature::new("age", c.age.clone()));
        cols.push(Feature::new("sex", c.sex.clone()));
    }
    let n = y.len();
    let p = cols.len();
    if p == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    for f in &cols {
        if f.values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "feature `{}` has {} rows, y has {n}",
                f.name,
                f.values.len()
            )));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "feature `{}` contains non-finite entries",
                f.name
            )));
        }
    }
    if n < p + 2 {
        return Err(Error::InsufficientData(format!(
            "OLS requires n >= p + 2 (n = {n}, p = {p})"
        )));
    }
    let bad = collinear_columns(&cols, n);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }

    let design = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { cols[c - 1].values[r] });
    let yv = DVector::from_column_slice(y);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &yv;
    let xtx_inv = xtx.try_inverse().ok_or_else(|| Error::RankDeficient {
        columns: cols.iter().map(|f| f.name.clone()).collect(),
    })?;
    let beta = &xtx_inv * xty;
    let fitted = &design * &beta;
    let residuals = &yv - &fitted;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let df_resid = n - p - 1;
    let r_squared = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let adj_r_squared =
        1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (df_resid as f64);

    // Perfect fit: F degenerates to infinity, CIs collapse.
    let sigma2 = sse / df_resid as f64;
    let (f_statistic, f_p_value) = if sse <= 1e-12 * sst.max(1e-300) {
        (f64::INFINITY, 0.0)
    } else {
        let ssr = sst - sse;
        let f = (ssr / p as f64) / sigma2;
        (f, special::f_sf(f, p as f64, df_resid as f64))
    };

    let t_crit = special::t_ppf(0.975, df_resid as f64);
    let coef_at = |idx: usize, name: &str| -> Coefficient {
        let b = beta[idx];
        let se = (sigma2 * xtx_inv[(idx, idx)]).max(0.0).sqrt();
        let t = if se > 0.0 {
            b / se
        } else if b == 0.0 {
            0.0
        } else {
            f64::INFINITY * b.signum()
        };
        let p_value = if se > 0.0 {
            special::t_sf_two_sided(t, df_resid as f64)
        } else {
            0.0
        };
        Coefficient {
            name: name.to_string(),
            beta: b,
            se,
            ci95: (b - t_crit * se, b + t_crit * se),
            t,
            p_value,
        }
    };
    let intercept = coef_at(0, "intercept");
    let coefficients: Vec<Coefficient> = cols
        .iter()
        .enumerate()
        .map(|(j, f)| coef_at(j + 1, &f.name))
        .collect();

    let vif = if p >= 2 {
        compute_vif(&cols).ok()
    } else {
        None
    };
    let resid_slice: Vec<f64> = residuals.iter().copied().collect();
    let residual_normality = stats::dagostino_k2(&resid_slice).ok().map(|t| NormalityVerdict {
        k2: t.statistic,
        p_value: t.p_value,
        normal: t.p_value >= 0.05,
    });

    Ok(RegressionModel {
        intercept,
        coefficients,
        f_statistic,
        f_p_value,
        df_model: p,
        df_resid,
        r_squared,
        adj_r_squared,
        vif,
        residual_normality,
        n,
        fitted: fitted.iter().copied().collect(),
    })
}

/// Variance inflation factors: VIF_j = 1/(1 − R²_j) where R²_j regresses
/// feature j on all the others. Perfect collinearity flags as infinity.
pub fn compute_vif(features: &[Feature]) -> Result<Vec<(String, f64)>> {
    if features.len() < 2 {
        return Err(Error::InsufficientData(
            "VIF requires at least 2 features".into(),
        ));
    }
    for f in features {
        let first = f.values[0];
        if f.values.iter().all(|v| *v == first) {
            return Err(Error::ConstantSeries(format!(
                "feature `{}` is constant",
                f.name
            )));
        }
    }
    let mut out = Vec::with_capacity(features.len());
    for (j, fj) in features.iter().enumerate() {
        let others: Vec<Feature> = features
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, f)| f.clone())
            .collect();
        let r2 = r_squared_of(&fj.values, &others)?;
        let vif = if 1.0 - r2 < 1e-12 {
            f64::INFINITY
        } else {
            1.0 / (1.0 - r2)
        };
        out.push((fj.name.clone(), vif));
    }
    Ok(out)
}

/// R² of regressing `target` on `predictors` with an intercept, tolerating
/// collinearity among the predictors (redundant columns are dropped).
fn r_squared_of(target: &[f64], predictors: &[Feature]) -> Result<f64> {
    let n = target.len();
    // Drop exactly dependent columns so the solve stays well-posed.
    let mut kept: Vec<Feature> = Vec::new();
    for f in predictors {
        let mut trial: Vec<Feature> = kept.clone();
        trial.push(f.clone());
        if collinear_columns(&trial, n).is_empty() {
            kept.push(f.clone());
        }
    }
    if kept.is_empty() {
        return Ok(0.0);
    }
    let p = kept.len();
    let design = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { kept[c - 1].values[r] });
    let yv = DVector::from_column_slice(target);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &yv;
    let beta = xtx
        .cholesky()
        .map(|ch| ch.solve(&xty))
        .ok_or_else(|| Error::RankDeficient {
            columns: kept.iter().map(|f| f.name.clone()).collect(),
        })?;
    let residuals = &yv - design * beta;
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let ybar = target.iter().sum::<f64>() / n as f64;
    let sst: f64 = target.iter().map(|v| (v - ybar).powi(2)).sum();
    if sst == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - sse / sst).clamp(0.0, 1.0))
}

/// Result of exhaustive best-subset selection.
#[derive(Debug, Clone)]
pub struct SubsetSelection {
    pub feature_names: Vec<String>,
    pub model: RegressionModel,
}

/// Exhaustively searches all size-k feature subsets for the highest R².
/// Ties (within 1e-12) break toward lower mean VIF, then lexicographically
/// smaller feature-name lists. k must lie in 2..=6 and not exceed the
/// feature count.
pub fn select_top_k(y: &[f64], features: &[Feature], k: usize) -> Result<SubsetSelection> {
    if !(2..=6).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "k must be within 2..=6, got {k}"
        )));
    }
    if k > features.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available features",
            features.len()
        )));
    }
    let mut best: Option<(Vec<usize>, RegressionModel, f64)> = None;
    let idx: Vec<usize> = (0..features.len()).collect();
    for_each_combination(&idx, k, &mut |subset| {
        let cols: Vec<Feature> = subset.iter().map(|&i| features[i].clone()).collect();
        let Ok(model) = fit_ols(y, &cols, None) else {
            return;
        };
        let mean_vif = model
            .vif
            .as_ref()
            .map(|v| v.iter().map(|(_, x)| *x).sum::<f64>() / v.len() as f64)
            .unwrap_or(f64::INFINITY);
        let better = match &best {
            None => true,
            Some((prev_idx, prev, prev_vif)) => {
                let dr2 = model.r_squared - prev.r_squared;
                if dr2 > 1e-12 {
                    true
                } else if dr2 < -1e-12 {
                    false
                } else if (mean_vif - prev_vif).abs() > 1e-9 {
                    mean_vif < *prev_vif
                } else {
                    names_of(features, subset) < names_of(features, prev_idx)
                }
            }
        };
        if better {
            best = Some((subset.to_vec(), model, mean_vif));
        }
    });
    let (subset, model, _) = best.ok_or_else(|| {
        Error::Degenerate("no size-k subset produced a fittable model".into())
    })?;
    Ok(SubsetSelection {
        feature_names: names_of(features, &subset),
        model,
    })
}

fn names_of(features: &[Feature], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| features[i].name.clone()).collect()
}

pub(crate) fn for_each_combination(items: &[usize], k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, f);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut Vec::new(), f);
}

/// PCA of standardized features (eigendecomposition of the correlation
/// matrix) for biplot rendering.
#[derive(Debug, Clone, Serialize)]
pub struct PcaBiplot {
    pub feature_names: Vec<String>,
    /// Eigenvector loadings, one row per feature, columns = PCs.
    pub loadings: Vec<Vec<f64>>,
    /// Scores, one row per observation, columns = PCs.
    pub scores: Vec<Vec<f64>>,
    /// Fractions of total variance, descending, summing to 1.
    pub explained_variance: Vec<f64>,
    /// Labels carried through for plotting (MEQ scores).
    pub labels: Vec<f64>,
}

/// Computes PCA biplot data from an acrophase feature set with MEQ labels.
/// Columns are z-scored; each PC's sign is fixed so its largest-magnitude
/// loading is positive.
pub fn pca_biplot_data(features: &[Feature], labels: &[f64]) -> Result<PcaBiplot> {
    let p = features.len();
    if p < 2 {
        return Err(Error::InsufficientData("PCA requires >= 2 features".into()));
    }
    let n = features[0].values.len();
    if n < 3 {
        return Err(Error::InsufficientData("PCA requires >= 3 rows".into()));
    }
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    let mut z = DMatrix::zeros(n, p);
    for (j, f) in features.iter().enumerate() {
        if f.values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "feature `{}` has {} rows, expected {n}",
                f.name,
                f.values.len()
            )));
        }
        let mean = f.values.iter().sum::<f64>() / n as f64;
        let sd = stats::sample_var(&f.values).sqrt();
        if sd == 0.0 {
            return Err(Error::ConstantSeries(format!(
                "feature `{}` is constant",
                f.name
            )));
        }
        for i in 0..n {
            z[(i, j)] = (f.values[i] - mean) / sd;
        }
    }
    let corr = z.transpose() * &z / (n as f64 - 1.0);
    let eig = nalgebra::SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_variance: Vec<f64> = eigenvalues.iter().map(|l| l / total).collect();

    let mut vectors = DMatrix::zeros(p, p);
    for (c, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // Sign convention: the largest-magnitude loading is positive.
        let mut max_idx = 0usize;
        for r in 1..p {
            if col[r].abs() > col[max_idx].abs() {
                max_idx = r;
            }
        }
        let sign = if col[max_idx] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            vectors[(r, c)] = sign * col[r];
        }
    }
    let scores_m = z * &vectors;
    Ok(PcaBiplot {
        feature_names: features.iter().map(|f| f.name.clone()).collect(),
        loadings: (0..p)
            .map(|r| (0..p).map(|c| vectors[(r, c)]).collect())
            .collect(),
        scores: (0..n)
            .map(|r| (0..p).map(|c| scores_m[(r, c)]).collect())
            .collect(),
        explained_variance,
        labels: labels.to_vec(),
    })
}
