//! Two-component PCA by power iteration with deflation.

/// Projects row-major `points` (`dim` columns) onto their leading principal
/// components. Each component's sign is fixed so its largest-magnitude
/// loading is positive.
pub fn project(points: &[f64], dim: usize, components: usize) -> Vec<Vec<f64>> {
    let n = points.len() / dim;
    if n == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; dim];
    for row in points.chunks(dim) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n as f64;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for row in points.chunks(dim) {
        for i in 0..dim {
            let a = row[i] - mean[i];
            for j in 0..dim {
                cov[i * dim + j] += a * (row[j] - mean[j]);
            }
        }
    }
    let axes = leading_eigenvectors(&mut cov, dim, components.min(dim));
    points
        .chunks(dim)
        .map(|row| {
            axes.iter()
                .map(|axis| axis.iter().zip(row).zip(&mean).map(|((a, x), m)| a * (x - m)).sum())
                .collect()
        })
        .collect()
}

/// Leading eigenvectors of a symmetric matrix; `matrix` is deflated in place.
pub fn leading_eigenvectors(matrix: &mut [f64], dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        // deterministic start that is unlikely to be orthogonal to the target
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i + c) % 7) as f64 * 0.1).collect();
        normalize(&mut v);
        let mut eigenvalue = 0.0;
        for _ in 0..5000 {
            let mut w = vec![0.0; dim];
            for i in 0..dim {
                w[i] = (0..dim).map(|j| matrix[i * dim + j] * v[j]).sum();
            }
            let norm = normalize(&mut w);
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = w;
            eigenvalue = norm;
            if norm == 0.0 || delta < 1e-12 {
                break;
            }
        }
        let lead = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..dim {
            for j in 0..dim {
                matrix[i * dim + j] -= eigenvalue * v[i] * v[j];
            }
        }
        out.push(v);
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_dominant_axis() {
        // spread along (1, 1, 0), small noise on z
        let pts: Vec<f64> = (0..50)
            .flat_map(|i| {
                let t = i as f64 - 25.0;
                [t, t, (i % 3) as f64 * 0.01]
            })
            .collect();
        let mut cov = vec![0.0; 9];
        let axes = {
            let n = 50.0;
            let mean: Vec<f64> = (0..3).map(|d| pts.iter().skip(d).step_by(3).sum::<f64>() / n).collect();
            for row in pts.chunks(3) {
                for i in 0..3 {
                    for j in 0..3 {
                        cov[i * 3 + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                    }
                }
            }
            leading_eigenvectors(&mut cov, 3, 2)
        };
        let h = 0.5f64.sqrt();
        assert!((axes[0][0] - h).abs() < 1e-6 && (axes[0][1] - h).abs() < 1e-6);
        let dot: f64 = axes[0].iter().zip(&axes[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-6);
        let proj = project(&pts, 3, 2);
        assert_eq!(proj.len(), 50);
        assert!(proj.iter().map(|p| p[0]).sum::<f64>().abs() < 1e-9);
        assert!((proj[0][0] + 24.5 * 2f64.sqrt()).abs() < 1e-3);
    }
}
