//! Normalized fast Walsh–Hadamard transform.

use crate::error::{Error, Result};

/// Unnormalized in-place butterfly: `v ← H_m v` with the Sylvester ordering
/// `H_m = [[H, H], [H, -H]]`.
pub(crate) fn butterfly(v: &mut [f64]) {
    let m = v.len();
    let mut half = 1;
    while half < m {
        for start in (0..m).step_by(2 * half) {
            let (lo, hi) = v[start..start + 2 * half].split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        half *= 2;
    }
}

/// `v ← (H_m / √m) v`, in place. The normalized transform is its own inverse.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let m = v.len();
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(m));
    }
    butterfly(v);
    let scale = 1.0 / (m as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}
