use serde::{Deserialize, Serialize};

use crate::integrator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Both,
}

/// Hyperplane `y[coordinate] = level` with a crossing direction.
/// `coordinate` is a zero-based index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPlane {
    pub coordinate: usize,
    pub level: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPoints {
    pub plane: SectionPlane,
    pub times: Vec<f64>,
    /// Remaining `d − 1` coordinates at each crossing.
    pub points: Vec<Vec<f64>>,
    /// Largest `|coordinate − level|` of the refined crossings.
    pub max_residual: f64,
}

const MAX_ITER: usize = 60;

/// Cubic Lagrange interpolation through up to four samples around the
/// interval `[i, i + 1]`.
struct LocalInterp<'a> {
    traj: &'a Trajectory,
    idx: Vec<usize>,
}

impl<'a> LocalInterp<'a> {
    fn new(traj: &'a Trajectory, i: usize) -> Self {
        let n = traj.len();
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(n - 1);
        Self { traj, idx: (lo..=hi).collect() }
    }

    fn eval(&self, t: f64, coord: usize) -> f64 {
        let ts = &self.traj.times;
        let mut acc = 0.0;
        for &j in &self.idx {
            let mut w = 1.0;
            for &m in &self.idx {
                if m != j {
                    w *= (t - ts[m]) / (ts[j] - ts[m]);
                }
            }
            acc += w * self.traj.state(j)[coord];
        }
        acc
    }
}

/// Crossings of a hyperplane by a sampled trajectory, refined by bracketed
/// secant (Illinois) iteration on a local cubic interpolant.
pub fn poincare_section(traj: &Trajectory, coordinate: usize, level: f64, direction: Direction) -> SectionPoints {
    let plane = SectionPlane { coordinate, level, direction };
    let mut out = SectionPoints { plane, times: Vec::new(), points: Vec::new(), max_residual: 0.0 };
    if traj.len() < 2 || coordinate >= traj.dim {
        return out;
    }
    for i in 0..traj.len() - 1 {
        let g0 = traj.state(i)[coordinate] - level;
        let g1 = traj.state(i + 1)[coordinate] - level;
        let up = g0 < 0.0 && g1 >= 0.0;
        let down = g0 > 0.0 && g1 <= 0.0;
        let wanted = match direction {
            Direction::Up => up,
            Direction::Down => down,
            Direction::Both => up || down,
        };
        if !wanted {
            continue;
        }

        let interp = LocalInterp::new(traj, i);
        let g = |t: f64| interp.eval(t, coordinate) - level;
        let (mut a, mut b) = (traj.times[i], traj.times[i + 1]);
        let (mut ga, mut gb) = (g0, g1);
        let mut t = b;
        let mut gt = gb;
        let mut side = 0i8;
        for _ in 0..MAX_ITER {
            if gb == 0.0 {
                t = b;
                gt = 0.0;
                break;
            }
            t = (a * gb - b * ga) / (gb - ga);
            gt = g(t);
            if gt == 0.0 || (b - a).abs() <= 1e-15 * b.abs().max(1.0) {
                break;
            }
            if (gt > 0.0) == (gb > 0.0) {
                b = t;
                gb = gt;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            } else {
                a = t;
                ga = gt;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            }
            if gt.abs() <= 1e-15 * level.abs().max(1.0) {
                break;
            }
        }
        out.max_residual = out.max_residual.max(gt.abs());
        out.times.push(t);
        out.points.push((0..traj.dim).filter(|&c| c != coordinate).map(|c| interp.eval(t, c)).collect());
    }
    out
}
