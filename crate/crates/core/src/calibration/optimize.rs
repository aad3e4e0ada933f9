/// Result of a one-dimensional bracketed minimisation.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[lo, hi]`, stopping once the
/// bracket is narrower than `tol`. The returned point is the better of the
/// last interior probe and the two bracket ends, so boundary minima are found.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < 500 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (mut x, mut fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    for end in [lo, hi] {
        if (end - x).abs() <= tol {
            let fe = f(end);
            if fe < fx {
                x = end;
                fx = fe;
            }
        }
    }
    Minimum {
        x,
        fx,
        iterations,
        converged: (b - a).abs() <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_and_boundary_minima() {
        let m = golden_section(|x| (x - 1.3).powi(2), 0.0, 5.0, 1e-6);
        assert!((m.x - 1.3).abs() < 1e-5);
        assert!(m.converged);
        let m = golden_section(|x| x, 0.05, 20.0, 1e-4);
        assert_eq!(m.x, 0.05);
        let m = golden_section(|x| -x, 0.05, 20.0, 1e-4);
        assert_eq!(m.x, 20.0);
    }
}
