//! Adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;

// Published to 33 digits; rounding happens at compile time.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod estimate and the embedded 7-point Gauss error.
pub fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx)? + f(c + dx)?;
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

/// Subinterval budget of the adaptive integrator.
pub const MAX_INTERVALS: usize = 2000;

struct Piece {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// The piece with the largest error estimate is bisected until the summed
/// estimate drops below `tol` or the interval budget is spent; in the latter
/// case the best estimate is returned, so roundoff in `f` cannot stall it.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_with_budget(&mut f, a, b, tol, MAX_INTERVALS).map(|(v, _)| v)
}

/// Value and error estimate, bisecting at most `max_intervals` times.
pub fn integrate_with_budget<F>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (val, err) = gk15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        lo: a,
        hi: b,
        val,
        err,
    });
    let mut total_err = err;
    let mut count = 1;
    while total_err > tol && count < max_intervals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid == worst.lo || mid == worst.hi {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.lo, mid)?;
        let (v2, e2) = gk15(f, mid, worst.hi)?;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece {
            lo: worst.lo,
            hi: mid,
            val: v1,
            err: e1,
        });
        heap.push(Piece {
            lo: mid,
            hi: worst.hi,
            val: v2,
            err: e2,
        });
        count += 1;
    }
    // Re-summed to shed the drift of the running update.
    let err: f64 = heap.iter().map(|p| p.err).sum();
    Ok((heap.iter().map(|p| p.val).sum(), err))
}

/// Sum of adaptive integrals over consecutive panels `[p₀, p₁], [p₁, p₂], …`.
pub fn integrate_panels<F>(mut f: F, breaks: &[f64], tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += integrate_with_budget(&mut f, w[0], w[1], tol / n, MAX_INTERVALS)?.0;
    }
    Ok(total)
}
