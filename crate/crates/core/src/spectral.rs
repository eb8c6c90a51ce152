//! FFT plumbing over the `(x3, x2, x1, spin)` amplitude layout.
//!
//! Amplitudes are stored with spin fastest, then x1, x2 and x3 outermost,
//! so the flat index is `((i3 * n + i2) * n + i1) * dim + s`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
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

/// Stride of grid axis `axis` (0-based) in the flat layout.
pub(crate) fn axis_stride(n: usize, dim: usize, axis: usize) -> usize {
    match axis {
        0 => dim,
        1 => n * dim,
        2 => n * n * dim,
        _ => panic!("axis {axis} out of range"),
    }
}

/// Visits every 1D line along `axis`, handing the caller a gathered buffer.
fn for_each_line(
    amps: &mut [C64],
    n: usize,
    dim: usize,
    axis: usize,
    mut body: impl FnMut(&mut [C64]),
) {
    let stride = axis_stride(n, dim, axis);
    let total = amps.len();
    let mut line = vec![C64::new(0.0, 0.0); n];
    for base in 0..total {
        // A base is a line start iff its axis coordinate is zero.
        if (base / stride) % n != 0 {
            continue;
        }
        for (i, v) in line.iter_mut().enumerate() {
            *v = amps[base + i * stride];
        }
        body(&mut line);
        for (i, v) in line.iter().enumerate() {
            amps[base + i * stride] = *v;
        }
    }
}

/// Unnormalized in-place DFT along one axis (`inverse` selects the sign).
pub(crate) fn fft_axis(amps: &mut [C64], n: usize, dim: usize, axis: usize, inverse: bool) {
    let fft = plan(n, inverse);
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for_each_line(amps, n, dim, axis, |line| {
        fft.process_with_scratch(line, &mut scratch)
    });
}

/// Unnormalized 3D DFT over all grid axes.
pub(crate) fn fft3(amps: &mut [C64], n: usize, dim: usize, inverse: bool) {
    for axis in 0..3 {
        fft_axis(amps, n, dim, axis, inverse);
    }
}

/// Signed mode number of FFT-ordered index `j`: `m ∈ [-n/2, n/2)`.
pub(crate) fn mode_number(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Applies a diagonal momentum-space multiplier along a single axis.
///
/// `factor` receives the FFT-ordered index along `axis`.
pub(crate) fn axis_multiplier(
    amps: &[C64],
    n: usize,
    dim: usize,
    axis: usize,
    factor: impl Fn(usize) -> C64,
) -> Vec<C64> {
    let mut out = amps.to_vec();
    let forward = plan(n, false);
    let backward = plan(n, true);
    let mut scratch = vec![
        C64::new(0.0, 0.0);
        forward
            .get_inplace_scratch_len()
            .max(backward.get_inplace_scratch_len())
    ];
    let table: Vec<C64> = (0..n).map(|j| factor(j) / n as f64).collect();
    for_each_line(&mut out, n, dim, axis, |line| {
        forward.process_with_scratch(line, &mut scratch);
        for (v, f) in line.iter_mut().zip(&table) {
            *v *= f;
        }
        backward.process_with_scratch(line, &mut scratch);
    });
    out
}

/// Transforms to FFT-ordered momentum space, lets `f` rewrite each point's
/// spinor in place, and transforms back. `f` receives the flat point index.
pub(crate) fn momentum_map(
    amps: &[C64],
    n: usize,
    dim: usize,
    mut f: impl FnMut(usize, &mut [C64]),
) -> Vec<C64> {
    let mut out = amps.to_vec();
    fft3(&mut out, n, dim, false);
    let scale = 1.0 / (n * n * n) as f64;
    for (p, chunk) in out.chunks_mut(dim).enumerate() {
        f(p, chunk);
        for v in chunk.iter_mut() {
            *v *= scale;
        }
    }
    fft3(&mut out, n, dim, true);
    out
}
