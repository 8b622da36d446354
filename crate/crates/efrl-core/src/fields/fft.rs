//! Planned 2D complex FFTs on square grids, shared through a global plan cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, dir == FftDirection::Forward);
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, dir))
        .clone()
}

/// 2D transform: 1D FFTs over rows, then over columns via transpose.
pub(crate) fn transform2(mut data: Array2<Complex64>, dir: FftDirection) -> Array2<Complex64> {
    let n = data.nrows();
    debug_assert_eq!(n, data.ncols());
    let plan = plan(n, dir);
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        plan.process_with_scratch(slice, &mut scratch);
    }
    let mut transposed = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            transposed[[i, j]] = data[[j, i]];
        }
    }
    for mut row in transposed.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        plan.process_with_scratch(slice, &mut scratch);
    }
    for i in 0..n {
        for j in 0..n {
            data[[i, j]] = transposed[[j, i]];
        }
    }
    data
}
