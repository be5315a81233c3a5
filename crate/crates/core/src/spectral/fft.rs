//! Cached 3D complex FFTs on an `M × M × M` row-major buffer.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Plan>>> = RefCell::new(HashMap::new());
}

fn plan_for(m: usize) -> Rc<Plan> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(m)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(m);
                let inverse = planner.plan_fft_inverse(m);
                let scratch_len = forward
                    .get_inplace_scratch_len()
                    .max(inverse.get_inplace_scratch_len());
                Rc::new(Plan {
                    forward,
                    inverse,
                    scratch_len,
                })
            })
            .clone()
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Kernel `e^{-2πi jk/M}`.
    Forward,
    /// Kernel `e^{+2πi jk/M}`, unnormalized.
    Inverse,
}

/// In-place unnormalized 3D DFT of a row-major cube of side `m`.
pub(crate) fn fft3(data: &mut [Complex64], m: usize, dir: Direction) {
    debug_assert_eq!(data.len(), m * m * m);
    let plan = plan_for(m);
    let fft = match dir {
        Direction::Forward => &plan.forward,
        Direction::Inverse => &plan.inverse,
    };
    let mut scratch = vec![Complex64::default(); plan.scratch_len];
    let mut tmp = vec![Complex64::default(); data.len()];

    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    // middle axis: (i1, i2, i3) -> (i1, i3, i2)
    for i1 in 0..m {
        for i2 in 0..m {
            for i3 in 0..m {
                tmp[(i1 * m + i3) * m + i2] = data[(i1 * m + i2) * m + i3];
            }
        }
    }
    fft.process_with_scratch(&mut tmp, &mut scratch);
    for i1 in 0..m {
        for i2 in 0..m {
            for i3 in 0..m {
                data[(i1 * m + i2) * m + i3] = tmp[(i1 * m + i3) * m + i2];
            }
        }
    }

    // first axis: (i1, i2, i3) -> (i2, i3, i1)
    for i1 in 0..m {
        for i2 in 0..m {
            for i3 in 0..m {
                tmp[(i2 * m + i3) * m + i1] = data[(i1 * m + i2) * m + i3];
            }
        }
    }
    fft.process_with_scratch(&mut tmp, &mut scratch);
    for i1 in 0..m {
        for i2 in 0..m {
            for i3 in 0..m {
                data[(i1 * m + i2) * m + i3] = tmp[(i2 * m + i3) * m + i1];
            }
        }
    }
}
