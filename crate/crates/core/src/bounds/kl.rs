//! Bernoulli KL divergence and its upper/lower inverses.

/// Upper inverses closer to 1 than this are reported as exactly 1. Past this
/// point the spacing of `f64` near 1 no longer resolves `kl(p, q)` to 1e-9.
pub const UPPER_SATURATION: f64 = 1e-6;

/// Lower inverses below the smallest normal float are reported as 0.
pub const LOWER_SATURATION: f64 = f64::MIN_POSITIVE;

/// `kl(p || q)` in nats, with `0 ln 0 = 0`. Returns `+inf` when `q` is 0 or
/// 1 and `p` differs from it.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "p = {p}");
    debug_assert!((0.0..=1.0).contains(&q), "q = {q}");
    if p == q {
        return 0.0;
    }
    if q <= 0.0 || q >= 1.0 {
        return f64::INFINITY;
    }
    let first = if p > 0.0 { p * (p.ln() - q.ln()) } else { 0.0 };
    let second = if p < 1.0 {
        (1.0 - p) * ((1.0 - p).ln() - (1.0 - q).ln())
    } else {
        0.0
    };
    (first + second).max(0.0)
}

/// Bisection over the bit patterns of non-negative floats. `feasible` must
/// be true at `lo`, false at `hi`, and monotone in between. Returns the
/// adjacent pair (last feasible, first infeasible).
fn bisect_bits(lo: f64, hi: f64, feasible: impl Fn(f64) -> bool) -> (f64, f64) {
    let mut lo_bits = lo.to_bits();
    let mut hi_bits = hi.to_bits();
    // 64 halvings of a u64 range always reach adjacent floats.
    for _ in 0..100 {
        if hi_bits - lo_bits <= 1 {
            break;
        }
        let mid_bits = lo_bits + (hi_bits - lo_bits) / 2;
        if feasible(f64::from_bits(mid_bits)) {
            lo_bits = mid_bits;
        } else {
            hi_bits = mid_bits;
        }
    }
    (f64::from_bits(lo_bits), f64::from_bits(hi_bits))
}

/// `max { q in [p, 1] : kl(p || q) <= eps }`.
pub fn kl_inv_upper(p: f64, eps: f64) -> f64 {
    assert!(eps >= 0.0, "eps must be non-negative, got {eps}");
    let p = p.clamp(0.0, 1.0);
    if eps == 0.0 || p >= 1.0 {
        return p;
    }
    if kl_bernoulli(p, 1.0 - UPPER_SATURATION) <= eps {
        return 1.0;
    }
    let (lo, _) = bisect_bits(p, 1.0 - UPPER_SATURATION, |q| kl_bernoulli(p, q) <= eps);
    lo
}

/// `min { q in [0, p] : kl(p || q) <= eps }`.
pub fn kl_inv_lower(p: f64, eps: f64) -> f64 {
    assert!(eps >= 0.0, "eps must be non-negative, got {eps}");
    let p = p.clamp(0.0, 1.0);
    if eps == 0.0 || p <= 0.0 {
        return p;
    }
    if p <= LOWER_SATURATION || kl_bernoulli(p, LOWER_SATURATION) <= eps {
        return 0.0;
    }
    // Feasibility grows with q on [0, p]; search the infeasible/feasible
    // boundary and return the feasible side.
    let (_, hi) = bisect_bits(LOWER_SATURATION, p, |q| kl_bernoulli(p, q) > eps);
    hi
}
