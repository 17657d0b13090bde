//! Thin wrapper over rustfft for 1-D and 2-D periodic grids.
//!
//! Layout is row-major with axis 0 slowest: `idx = i0 * n + i1` in 2-D.
//! The forward transform carries the `1/N^d` factor so coefficients are
//! grid averages.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Plan {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

fn transpose(n: usize, data: &mut [Complex64]) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn run(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    fft.process_with_scratch(data, &mut scratch);
    if dim == 2 {
        transpose(n, data);
        fft.process_with_scratch(data, &mut scratch);
        transpose(n, data);
    }
}

/// Forward transform, normalized so the zero coefficient is the mean.
pub(crate) fn forward(dim: usize, n: usize, data: &mut [Complex64]) {
    run(dim, n, data, false);
    let scale = 1.0 / data.len() as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Inverse of [`forward`]: synthesizes grid values from coefficients.
pub(crate) fn inverse(dim: usize, n: usize, data: &mut [Complex64]) {
    run(dim, n, data, true);
}
