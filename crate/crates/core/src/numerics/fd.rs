//! Central finite differences with one step of Richardson extrapolation.

/// First derivative of `f` at `x`: central differences at steps `h` and `h/2`
/// combined to cancel the `O(h²)` term.
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let h2 = 0.5 * h;
    let d2 = (f(x + h2) - f(x - h2)) / (2.0 * h2);
    (4.0 * d2 - d1) / 3.0
}

/// Second derivative of `f` at `x` with the same extrapolation.
pub fn second_derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let f0 = f(x);
    let d1 = (f(x + h) - 2.0 * f0 + f(x - h)) / (h * h);
    let h2 = 0.5 * h;
    let d2 = (f(x + h2) - 2.0 * f0 + f(x - h2)) / (h2 * h2);
    (4.0 * d2 - d1) / 3.0
}

/// Mixed or pure second partial derivative `∂²F/∂x_i∂x_j` of a vector valued
/// function of several real variables, Richardson extrapolated.
pub fn hessian_entry<const M: usize, F>(f: &F, x: &[f64], i: usize, j: usize, h: f64) -> [f64; M]
where
    F: Fn(&[f64]) -> [f64; M],
{
    let single = |h: f64| -> [f64; M] {
        let mut out = [0.0; M];
        if i == j {
            let mut p = x.to_vec();
            p[i] += h;
            let fp = f(&p);
            p[i] -= 2.0 * h;
            let fm = f(&p);
            let f0 = f(x);
            for k in 0..M {
                out[k] = (fp[k] - 2.0 * f0[k] + fm[k]) / (h * h);
            }
        } else {
            let mut p = x.to_vec();
            let mut eval = |si: f64, sj: f64| {
                p.copy_from_slice(x);
                p[i] += si * h;
                p[j] += sj * h;
                f(&p)
            };
            let fpp = eval(1.0, 1.0);
            let fpm = eval(1.0, -1.0);
            let fmp = eval(-1.0, 1.0);
            let fmm = eval(-1.0, -1.0);
            for k in 0..M {
                out[k] = (fpp[k] - fpm[k] - fmp[k] + fmm[k]) / (4.0 * h * h);
            }
        }
        out
    };
    let a = single(h);
    let b = single(0.5 * h);
    let mut out = [0.0; M];
    for k in 0..M {
        out[k] = (4.0 * b[k] - a[k]) / 3.0;
    }
    out
}

/// Partial derivative `∂F/∂x_i` of a vector valued function, Richardson extrapolated.
pub fn gradient_entry<const M: usize, F>(f: &F, x: &[f64], i: usize, h: f64) -> [f64; M]
where
    F: Fn(&[f64]) -> [f64; M],
{
    let single = |h: f64| -> [f64; M] {
        let mut p = x.to_vec();
        p[i] += h;
        let fp = f(&p);
        p[i] -= 2.0 * h;
        let fm = f(&p);
        let mut out = [0.0; M];
        for k in 0..M {
            out[k] = (fp[k] - fm[k]) / (2.0 * h);
        }
        out
    };
    let a = single(h);
    let b = single(0.5 * h);
    let mut out = [0.0; M];
    for k in 0..M {
        out[k] = (4.0 * b[k] - a[k]) / 3.0;
    }
    out
}

fn central_stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("no central stencil of order {order}"),
    }
}

/// Mixed partial derivative `∂^α f` of a scalar function of several real
/// variables, `orders[i] ≤ 4` being the order in `x_i`. Tensor product of
/// second-order central stencils, Richardson extrapolated over `h` and `h/2`.
pub fn mixed_partial<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], orders: &[usize], h: f64) -> f64 {
    assert_eq!(x.len(), orders.len());
    let total: usize = orders.iter().sum();
    let single = |h: f64| -> f64 {
        let stencils: Vec<_> = orders.iter().map(|&k| central_stencil(k)).collect();
        let mut idx = vec![0usize; x.len()];
        let mut p = x.to_vec();
        let mut acc = 0.0;
        loop {
            let mut w = 1.0;
            for (v, st) in stencils.iter().enumerate() {
                let (off, wt) = st[idx[v]];
                p[v] = x[v] + off as f64 * h;
                w *= wt;
            }
            acc += w * f(&p);
            let mut v = 0;
            while v < idx.len() {
                idx[v] += 1;
                if idx[v] < stencils[v].len() {
                    break;
                }
                idx[v] = 0;
                v += 1;
            }
            if v == idx.len() {
                break;
            }
        }
        acc / h.powi(total as i32)
    };
    let a = single(h);
    let b = single(0.5 * h);
    (4.0 * b - a) / 3.0
}

/// Value at `x = 0` of the interpolating polynomial through `(xs[i], ys[i])`, by Neville's scheme.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut p = ys.to_vec();
    for m in 1..xs.len() {
        for i in 0..xs.len() - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}
