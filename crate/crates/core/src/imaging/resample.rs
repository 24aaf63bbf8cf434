/// Box-filtered sample of the source interval `[start, end)` of a 1-D signal
/// of length `len`. A zero-length interval reads the pixel containing `start`.
pub(super) fn box_sample(len: usize, start: f64, end: f64, value: impl Fn(usize) -> f64) -> f64 {
    if end - start <= 1e-12 {
        let i = (start.floor().max(0.0) as usize).min(len - 1);
        return value(i);
    }
    let first = start.floor().max(0.0) as usize;
    let last = (end.ceil() as usize).min(len);
    let mut acc = 0.0;
    let mut weight = 0.0;
    for i in first..last {
        let lo = start.max(i as f64);
        let hi = end.min(i as f64 + 1.0);
        if hi > lo {
            acc += (hi - lo) * value(i);
            weight += hi - lo;
        }
    }
    if weight == 0.0 {
        value(first.min(len - 1))
    } else {
        acc / weight
    }
}

/// Linear interpolation at continuous pixel coordinate `x` (pixel centers at
/// `i + 0.5`); outside the signal the `fill` value is used.
pub(super) fn linear_sample(len: usize, x: f64, fill: f64, value: impl Fn(usize) -> f64) -> f64 {
    let pos = x - 0.5;
    let i0 = pos.floor();
    let frac = pos - i0;
    let at = |i: f64| {
        if i < 0.0 || i >= len as f64 {
            fill
        } else {
            value(i as usize)
        }
    };
    if frac == 0.0 {
        return at(i0);
    }
    (1.0 - frac) * at(i0) + frac * at(i0 + 1.0)
}

pub(super) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
