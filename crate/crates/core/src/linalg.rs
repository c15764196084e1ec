//! Small dense helpers for column-major square frames.

/// Orthonormalises the columns of the column-major `d × d` matrix `frame`
/// in place (modified Gram–Schmidt with one reorthogonalisation pass) and
/// returns the diagonal of the triangular factor.
pub fn gram_schmidt(frame: &mut [f64], d: usize) -> Vec<f64> {
    assert_eq!(frame.len(), d * d);
    let mut diag = vec![0.0; d];
    for j in 0..d {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = frame.split_at_mut(j * d);
                let qi = &done[i * d..(i + 1) * d];
                let vj = &mut rest[..d];
                let r: f64 = qi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                for (v, q) in vj.iter_mut().zip(qi) {
                    *v -= r * q;
                }
            }
        }
        let col = &mut frame[j * d..(j + 1) * d];
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        diag[j] = norm;
        if norm > 0.0 {
            for v in col.iter_mut() {
                *v /= norm;
            }
        }
    }
    diag
}

/// `max |QᵀQ − I|` over all entries.
pub fn orthonormality_defect(frame: &[f64], d: usize) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            let qi = &frame[i * d..(i + 1) * d];
            let qj = &frame[j * d..(j + 1) * d];
            let dot: f64 = qi.iter().zip(qj).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Fixed orthonormal frame with no column aligned to a coordinate axis or
/// coordinate diagonal: Gram–Schmidt of a golden-ratio sequence.
pub fn generic_frame(d: usize) -> Vec<f64> {
    const PHI: f64 = 0.618_033_988_749_894_8;
    let mut frame: Vec<f64> = (0..d * d)
        .map(|k| {
            let x = ((k + 1) as f64 * PHI).fract() - 0.5;
            // keep the matrix comfortably nonsingular
            if k % (d + 1) == 0 {
                x + 2.0
            } else {
                x
            }
        })
        .collect();
    gram_schmidt(&mut frame, d);
    frame
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_frame_is_orthonormal_and_mixed() {
        for d in [3, 5] {
            let f = generic_frame(d);
            assert!(orthonormality_defect(&f, d) < 1e-14);
            assert!(f.iter().all(|v| v.abs() > 1e-3), "{f:?}");
        }
    }

    #[test]
    fn orthonormalises_ill_conditioned_columns() {
        let d = 4;
        let mut frame = vec![0.0; d * d];
        for j in 0..d {
            for i in 0..d {
                // Hilbert-like columns
                frame[j * d + i] = 1.0 / (i + j + 1) as f64;
            }
        }
        let diag = gram_schmidt(&mut frame, d);
        assert!(orthonormality_defect(&frame, d) <= 1e-12);
        assert!(diag.iter().all(|r| *r > 0.0));
    }

    #[test]
    fn diagonal_records_column_lengths() {
        let mut frame = vec![3.0, 0.0, 0.0, 0.5];
        let diag = gram_schmidt(&mut frame, 2);
        assert_eq!(diag, vec![3.0, 0.5]);
        assert_eq!(frame, identity(2));
    }
}
