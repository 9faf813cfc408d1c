//! Derives the Ankle landscape's minimizer numerically: a coarse grid over
//! the native bounds followed by cyclic golden-section refinement.

use ascma::landscapes::{ankle, Landscape};

const GRID: usize = 41;

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-13 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    // The minimum may sit on a bound.
    [lo, hi, mid].into_iter().min_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

fn main() {
    let land = Landscape::ankle4();
    let bounds = land.bounds().to_vec();
    let axis = |d: usize, i: usize| bounds[d].0 + (bounds[d].1 - bounds[d].0) * i as f64 / (GRID - 1) as f64;

    let mut best = (f64::INFINITY, vec![0.0; 4]);
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                for d in 0..GRID {
                    let x = vec![axis(0, a), axis(1, b), axis(2, c), axis(3, d)];
                    let y = ankle(&x);
                    if y < best.0 {
                        best = (y, x);
                    }
                }
            }
        }
    }
    println!("grid    x = {:?}  y = {:.12}", best.1, best.0);

    let mut x = best.1;
    for _ in 0..20 {
        for d in 0..4 {
            let probe = |v: f64| {
                let mut p = x.clone();
                p[d] = v;
                ankle(&p)
            };
            x[d] = golden_min(probe, bounds[d].0, bounds[d].1);
        }
    }
    println!("refined x = {:?}  y = {:.12}", x, ankle(&x));
    let (x_star, y_star) = land.true_optimum();
    println!("stored  x = {:?}  y = {:.12}", x_star, y_star);
}
