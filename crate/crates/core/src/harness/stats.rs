//! Learning-curve statistics across training sessions.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveStat {
    pub mean: f64,
    pub ci_half_width: f64,
    pub n_sessions: usize,
}

/// Two-sided Student-t quantile `t_{dof, (1 + confidence) / 2}`.
pub fn student_t_quantile(dof: usize, confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Statistics(format!("confidence {confidence} not in (0, 1)")));
    }
    let dist = StudentsT::new(0.0, 1.0, dof as f64)
        .map_err(|e| Error::Statistics(e.to_string()))?;
    Ok(dist.inverse_cdf(0.5 + confidence / 2.0))
}

/// Mean and sample standard deviation, exact for constant samples.
pub fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let pivot = samples[0];
    let shifted_sum: f64 = samples.iter().map(|x| x - pivot).sum();
    let shifted_sq: f64 = samples.iter().map(|x| (x - pivot) * (x - pivot)).sum();
    let shifted_mean = shifted_sum / n;
    let var = if samples.len() > 1 {
        ((shifted_sq - n * shifted_mean * shifted_mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    (pivot + shifted_mean, var.sqrt())
}

/// Per-episode mean reward and Student-t confidence half-width over sessions.
/// `sessions[j][i]` is the reward of episode `i` in session `j`.
pub fn aggregate_rewards(sessions: &[&[f64]], confidence: f64) -> Result<Vec<CurveStat>> {
    if sessions.len() < 2 {
        return Err(Error::Statistics(format!(
            "need at least 2 sessions for a confidence interval, got {}",
            sessions.len()
        )));
    }
    let episodes = sessions[0].len();
    if sessions.iter().any(|s| s.len() != episodes) {
        return Err(Error::Statistics("sessions have different episode counts".into()));
    }
    let n = sessions.len();
    let t = student_t_quantile(n - 1, confidence)?;
    Ok((0..episodes)
        .map(|i| {
            let column: Vec<f64> = sessions.iter().map(|s| s[i]).collect();
            let (mean, std) = mean_and_std(&column);
            CurveStat {
                mean,
                ci_half_width: t * std / (n as f64).sqrt(),
                n_sessions: n,
            }
        })
        .collect())
}
