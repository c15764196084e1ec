/// Local maxima of `values` (three-point test on interior samples), each
/// refined by the vertex of the parabola through the sample and its
/// neighbours. At most `cap` maxima, in sample order.
pub fn local_maxima(values: &[f64], cap: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if out.len() >= cap {
            break;
        }
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b > a && b >= c {
            let curvature = a - 2.0 * b + c;
            let peak = if curvature < 0.0 { b - (c - a).powi(2) / (8.0 * curvature) } else { b };
            out.push(peak);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_vertex_is_exact() {
        // samples of 3 - (x - 0.3)^2 at x = -1, 0, 1
        let f = |x: f64| 3.0 - (x - 0.3).powi(2);
        let peaks = local_maxima(&[f(-1.0), f(0.0), f(1.0)], 8);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sine_peaks_and_cap() {
        let values: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.05).sin()).collect();
        let peaks = local_maxima(&values, 64);
        assert_eq!(peaks.len(), 16);
        assert!(peaks.iter().all(|p| (p - 1.0).abs() < 1e-5));
        assert_eq!(local_maxima(&values, 3).len(), 3);
        assert!(local_maxima(&[1.0, 1.0, 1.0], 4).is_empty());
        assert!(local_maxima(&[], 4).is_empty());
    }
}
