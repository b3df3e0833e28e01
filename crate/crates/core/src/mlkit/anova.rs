use super::{MlError, Result};
use crate::stats::{f_crit, f_sf};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    /// `None` when the within-group mean square is zero.
    pub f: Option<f64>,
    pub p: Option<f64>,
    pub f_crit: f64,
}

impl AnovaEffect {
    pub fn undefined(&self) -> bool {
        self.f.is_none()
    }
}

/// Two-factor ANOVA with replication. Factor A indexes the outer level of
/// the input (e.g. model), factor B the middle one (e.g. metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub a: AnovaEffect,
    pub b: AnovaEffect,
    pub interaction: AnovaEffect,
    pub within_ss: f64,
    pub within_df: usize,
    pub total_ss: f64,
    pub total_df: usize,
    pub alpha: f64,
}

impl AnovaTable {
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        let mut s = String::from("Source,SS,df,MS,F,P-value,F crit\n");
        for (name, e) in [("A", &self.a), ("B", &self.b), ("Interaction", &self.interaction)] {
            s.push_str(&format!("{name},{},{},{},{},{},{}\n", e.ss, e.df, e.ms, opt(e.f), opt(e.p), e.f_crit));
        }
        let ms_w = self.within_ss / self.within_df as f64;
        s.push_str(&format!("Within,{},{},{ms_w},,,\n", self.within_ss, self.within_df));
        s.push_str(&format!("Total,{},{},,,,\n", self.total_ss, self.total_df));
        s
    }
}

/// `values[i][j]` holds the `r` replicates of cell (A = i, B = j). Requires
/// at least two levels per factor, equal replication and `r >= 2`.
pub fn anova_two_way(values: &[Vec<Vec<f64>>], alpha: f64) -> Result<AnovaTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MlError::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let a = values.len();
    if a < 2 {
        return Err(MlError::UnbalancedDesign(format!("factor A needs >= 2 levels, got {a}")));
    }
    let b = values[0].len();
    if b < 2 {
        return Err(MlError::UnbalancedDesign(format!("factor B needs >= 2 levels, got {b}")));
    }
    let r = values[0][0].len();
    if r < 2 {
        return Err(MlError::UnbalancedDesign(format!("need >= 2 replicates per cell, got {r}")));
    }
    for (i, row) in values.iter().enumerate() {
        if row.len() != b {
            return Err(MlError::UnbalancedDesign(format!("A level {i} has {} B levels, expected {b}", row.len())));
        }
        for (j, cell) in row.iter().enumerate() {
            if cell.len() != r {
                return Err(MlError::UnbalancedDesign(format!("cell ({i}, {j}) has {} replicates, expected {r}", cell.len())));
            }
            if cell.iter().any(|v| !v.is_finite()) {
                return Err(MlError::InvalidConfig(format!("cell ({i}, {j}) holds a non-finite value")));
            }
        }
    }
    let (af, bf, rf) = (a as f64, b as f64, r as f64);
    let cell_mean: Vec<Vec<f64>> = values.iter().map(|row| row.iter().map(|c| c.iter().sum::<f64>() / rf).collect()).collect();
    let grand = cell_mean.iter().flatten().sum::<f64>() / (af * bf);
    let a_mean: Vec<f64> = cell_mean.iter().map(|row| row.iter().sum::<f64>() / bf).collect();
    let b_mean: Vec<f64> = (0..b).map(|j| cell_mean.iter().map(|row| row[j]).sum::<f64>() / af).collect();

    let ss_a = bf * rf * a_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = af * rf * b_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    let mut ss_w = 0.0;
    let mut ss_t = 0.0;
    for i in 0..a {
        for j in 0..b {
            let m = cell_mean[i][j];
            ss_ab += rf * (m - a_mean[i] - b_mean[j] + grand).powi(2);
            for &v in &values[i][j] {
                ss_w += (v - m).powi(2);
                ss_t += (v - grand).powi(2);
            }
        }
    }
    let df_w = a * b * (r - 1);
    let ms_w = ss_w / df_w as f64;
    let effect = |ss: f64, df: usize| {
        let ms = ss / df as f64;
        let f = (ms_w > 0.0).then(|| ms / ms_w);
        AnovaEffect { ss, df, ms, f, p: f.map(|f| f_sf(f, df as f64, df_w as f64)), f_crit: f_crit(alpha, df as f64, df_w as f64) }
    };
    Ok(AnovaTable {
        a: effect(ss_a, a - 1),
        b: effect(ss_b, b - 1),
        interaction: effect(ss_ab, (a - 1) * (b - 1)),
        within_ss: ss_w,
        within_df: df_w,
        total_ss: ss_t,
        total_df: a * b * r - 1,
        alpha,
    })
}
