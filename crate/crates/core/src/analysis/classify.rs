use serde::{Deserialize, Serialize};

use super::LyapunovReport;
use crate::integrator::Trajectory;

/// Band `[−eps, eps]` within which an exponent counts as zero.
pub const DEFAULT_EPS_ZERO: f64 = 1e-3;

/// Terminal variation below which a run counts as settled.
pub const SETTLED_VARIATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Equilibrium,
    Periodic,
    QuasiperiodicOrTorus,
    Chaotic,
    Diverged,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Equilibrium => "equilibrium",
            Classification::Periodic => "periodic",
            Classification::QuasiperiodicOrTorus => "quasiperiodic-or-torus",
            Classification::Chaotic => "chaotic",
            Classification::Diverged => "diverged",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Largest peak-to-peak spread of any coordinate over the last 10% of
/// samples (at least two samples).
pub fn terminal_variation(traj: &Trajectory) -> f64 {
    let n = traj.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let tail = (n / 10).max(2).min(n);
    let mut worst = 0.0_f64;
    for c in 0..traj.dim {
        let (lo, hi) = (n - tail..n)
            .map(|i| traj.state(i)[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        worst = worst.max(hi - lo);
    }
    worst
}

/// Threshold classification of a run from its spectrum and sampled
/// trajectory.
pub fn classify(report: &LyapunovReport, traj: &Trajectory, eps_zero: f64) -> Classification {
    let Some(&largest) = report.exponents.first() else {
        return Classification::Diverged;
    };
    if report.diverged() || report.exponents.iter().any(|l| !l.is_finite()) {
        return Classification::Diverged;
    }
    if traj.states().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Classification::Diverged;
    }
    if largest > eps_zero {
        return Classification::Chaotic;
    }
    if largest < -eps_zero {
        // Unsettled runs with a strictly negative spectrum are still
        // approaching a stable equilibrium.
        return Classification::Equilibrium;
    }
    let near_zero = report.exponents.iter().filter(|l| l.abs() <= eps_zero).count();
    if near_zero >= 2 {
        Classification::QuasiperiodicOrTorus
    } else {
        Classification::Periodic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::RunStatus;

    fn report(exponents: Vec<f64>) -> LyapunovReport {
        LyapunovReport {
            exponents,
            t_transient: 0.0,
            t_total: 1.0,
            renorm_interval: 1.0,
            convergence_trace: Vec::new(),
            status: RunStatus::Completed,
            final_state: Vec::new(),
            steps_taken: 0,
        }
    }

    fn still() -> Trajectory {
        Trajectory::from_samples(1, vec![0.0, 1.0, 2.0], &[vec![1.0], vec![1.0], vec![1.0]])
    }

    #[test]
    fn threshold_rules() {
        let t = still();
        assert_eq!(classify(&report(vec![0.4, 0.0, -1.0, -2.0]), &t, 1e-3), Classification::Chaotic);
        assert_eq!(classify(&report(vec![0.0, -1.0, -2.0]), &t, 1e-3), Classification::Periodic);
        assert_eq!(classify(&report(vec![2e-4, -3e-4, -2.0]), &t, 1e-3), Classification::QuasiperiodicOrTorus);
        assert_eq!(classify(&report(vec![-0.1, -1.0]), &t, 1e-3), Classification::Equilibrium);
        assert_eq!(classify(&report(vec![]), &t, 1e-3), Classification::Diverged);
        let mut r = report(vec![-1.0]);
        r.status = RunStatus::Diverged { t: 3.0, message: String::new() };
        assert_eq!(classify(&r, &t, 1e-3), Classification::Diverged);
    }

    #[test]
    fn variation_over_tail() {
        let states: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.0]).collect();
        let traj = Trajectory::from_samples(2, (0..20).map(f64::from).collect(), &states);
        assert_eq!(terminal_variation(&traj), 1.0);
        assert_eq!(terminal_variation(&still()), 0.0);
    }
}
