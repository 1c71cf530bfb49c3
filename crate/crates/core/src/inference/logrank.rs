use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Arm, Dataset};
use crate::special::chi_square_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRankResult {
    /// Deaths per group.
    pub observed: [usize; 2],
    /// Expected deaths per group under equal hazards.
    pub expected: [f64; 2],
    /// Σ(O₁ − E₁); negates when the groups are swapped.
    pub o_minus_e: f64,
    pub variance: f64,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Two-group log-rank test with the hypergeometric variance
/// `V_j = d_j (n₁ⱼ/n_j)(1 − n₁ⱼ/n_j)(n_j − d_j)/(n_j − 1)`.
///
/// When every risk set is confined to one group the variance is 0; if
/// observed and expected deaths then agree the statistic is 0 with p = 1,
/// otherwise the test is degenerate.
pub fn log_rank(first: &Dataset, second: &Dataset) -> Result<LogRankResult> {
    if first.is_empty() || second.is_empty() {
        return Err(Error::Usage("both groups need at least one subject".into()));
    }
    if first.n_events() + second.n_events() == 0 {
        return Err(Error::Usage("no events in either group".into()));
    }
    let mut records: Vec<(f64, bool, usize)> = first
        .observations()
        .iter()
        .map(|o| (o.time, o.event, 0))
        .chain(second.observations().iter().map(|o| (o.time, o.event, 1)))
        .collect();
    records.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk = [first.len() as f64, second.len() as f64];
    let mut expected = [0.0; 2];
    let mut variance = 0.0;
    let mut i = 0;
    while i < records.len() {
        let t = records[i].0;
        let mut deaths = [0.0; 2];
        let mut leaving = [0.0; 2];
        while i < records.len() && records[i].0 == t {
            let (_, event, g) = records[i];
            leaving[g] += 1.0;
            if event {
                deaths[g] += 1.0;
            }
            i += 1;
        }
        let d = deaths[0] + deaths[1];
        let n = at_risk[0] + at_risk[1];
        if d > 0.0 {
            let share = at_risk[0] / n;
            expected[0] += d * share;
            expected[1] += d * (1.0 - share);
            if n > 1.0 {
                variance += d * share * (1.0 - share) * (n - d) / (n - 1.0);
            }
        }
        at_risk[0] -= leaving[0];
        at_risk[1] -= leaving[1];
    }
    let observed = [first.n_events(), second.n_events()];
    let o_minus_e = observed[0] as f64 - expected[0];
    let statistic = if variance > 0.0 {
        o_minus_e * o_minus_e / variance
    } else if o_minus_e.abs() < 1e-9 {
        0.0
    } else {
        return Err(Error::Degenerate(
            "log-rank variance is zero but observed and expected deaths differ".into(),
        ));
    };
    Ok(LogRankResult {
        observed,
        expected,
        o_minus_e,
        variance,
        statistic,
        df: 1,
        p_value: chi_square_sf(statistic, 1)?,
    })
}

/// Control versus treated.
pub fn log_rank_by_arm(data: &Dataset) -> Result<LogRankResult> {
    if !data.has_arms() {
        return Err(Error::Usage("every observation needs an arm for the log-rank test".into()));
    }
    log_rank(&data.arm(Arm::Control), &data.arm(Arm::Treated))
}
