//! The buoyancy energy functional and the brute-force minimality
//! certificate for small columns.

/// `E(theta) = -Int z theta(z) dz` for the piecewise-constant profile:
/// exact cell integrals, weight `(2j+1)/(2 n^2)` for 0-based cell `j`.
pub fn energy(theta: &[f64]) -> f64 {
    let n = theta.len();
    let scale = 1.0 / (2.0 * (n * n) as f64);
    -theta
        .iter()
        .enumerate()
        .map(|(j, &th)| (2 * j + 1) as f64 * th * scale)
        .sum::<f64>()
}

/// Exhaustive certificate that `theta` minimizes the energy among all
/// permutations of its values. `None` above `n = 8` (8! = 40320 already).
pub fn minimality_certificate(theta: &[f64]) -> Option<bool> {
    if theta.len() > 8 {
        return None;
    }
    let base = energy(theta);
    let mut values = theta.to_vec();
    let mut minimal = true;
    permute(&mut values, theta.len(), &mut |perm| {
        if energy(perm) < base - 1e-15 {
            minimal = false;
        }
    });
    Some(minimal)
}

/// Heap's algorithm over the first `k` entries.
fn permute(values: &mut [f64], k: usize, visit: &mut impl FnMut(&[f64])) {
    if k <= 1 {
        visit(values);
        return;
    }
    for i in 0..k {
        permute(values, k - 1, visit);
        if k % 2 == 0 {
            values.swap(i, k - 1);
        } else {
            values.swap(0, k - 1);
        }
    }
}
