//! Float helpers routed through `libm` so results do not depend on the host
//! C library.

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rescales `row` in place to sum to one while holding every entry at or
/// above `floor`.
///
/// With `counts` as expected sufficient statistics this is the exact
/// maximizer of `Σ c_k ln p_k` over the floored simplex, found by
/// water-filling: entries whose proportional share falls under the floor are
/// clamped and the remaining mass is re-split among the rest.
pub fn floored_normalize(row: &mut [f64], floor: f64) {
    let n = row.len();
    if n == 0 {
        return;
    }
    let floor = floor.min(1.0 / n as f64);
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        row.iter_mut().for_each(|p| *p = 1.0 / n as f64);
        return;
    }
    let mut clamped = alloc::vec![false; n];
    loop {
        let free_mass: f64 = row.iter().zip(&clamped).filter(|(_, &c)| !c).map(|(&p, _)| p).sum();
        let n_clamped = clamped.iter().filter(|&&c| c).count();
        let budget = 1.0 - floor * n_clamped as f64;
        let mut changed = false;
        for i in 0..n {
            if !clamped[i] && (free_mass <= 0.0 || row[i] / free_mass * budget < floor) {
                clamped[i] = true;
                changed = true;
            }
        }
        if !changed {
            for i in 0..n {
                row[i] = if clamped[i] { floor } else { row[i] / free_mass * budget };
            }
            return;
        }
        if clamped.iter().all(|&c| c) {
            row.iter_mut().for_each(|p| *p = 1.0 / n as f64);
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floored_normalize_plain_row() {
        let mut row = [1.0, 3.0];
        floored_normalize(&mut row, 0.0);
        assert_eq!(row, [0.25, 0.75]);
    }

    #[test]
    fn floored_normalize_clamps_zeros() {
        let mut row = [0.0, 2.0, 2.0];
        floored_normalize(&mut row, 1e-3);
        assert_eq!(row[0], 1e-3);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((row[1] - row[2]).abs() < 1e-15);
    }

    #[test]
    fn floored_normalize_all_zero_is_uniform() {
        let mut row = [0.0; 4];
        floored_normalize(&mut row, 1e-10);
        assert_eq!(row, [0.25; 4]);
    }
}
