//! Univariate and bivariate standard normal distribution functions.
//!
//! The bivariate orthant probabilities use Genz's refinement of the
//! Drezner–Wesolowsky single-integral reduction (Gauss–Legendre rules with
//! 6, 12 or 20 points depending on |ρ|), which is accurate to about 1e-15.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Error, Result};

/// Correlation coefficient of a standard bivariate normal law.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_nan() || !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Domain(alloc::format!("correlation {rho} outside [-1, 1]")));
        }
        Ok(Self(rho))
    }

    /// Clamps tiny floating-point excursions past ±1 produced by plug-in
    /// formulas. Anything further out is still rejected.
    pub fn new_clamped(rho: f64) -> Result<Self> {
        if rho.is_finite() && rho.abs() <= 1.0 + 1e-12 {
            Ok(Self(rho.clamp(-1.0, 1.0)))
        } else {
            Self::new(rho)
        }
    }

    pub const ONE: Correlation = Correlation(1.0);
    pub const ZERO: Correlation = Correlation(0.0);

    pub fn get(self) -> f64 {
        self.0
    }
}

/// ρ at or beyond this distance from ±1 is treated as perfect correlation.
const DEGENERATE_RHO: f64 = 1e-12;

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate in the far right tail.
#[inline]
pub(crate) fn phi_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn density(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain("normal cdf argument must be finite"));
    }
    Ok(phi(x))
}

/// Standard normal survival function 1 − Φ(x).
pub fn std_normal_sf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain("normal sf argument must be finite"));
    }
    Ok(phi_sf(x))
}

/// Standard normal quantile Φ⁻¹(p) for 0 < p < 1.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(alloc::format!("quantile probability {p} outside (0, 1)")));
    }
    Ok(quantile(p))
}

// Wichura's AS 241 (PPND16), followed by one Newton step.
pub(crate) fn quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let q = p - 0.5;
    let mut z = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(&A, r) / poly(&B, r)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = libm::sqrt(-libm::log(tail));
        let x = if r <= 5.0 {
            r -= 1.6;
            poly(&C, r) / poly(&D, r)
        } else {
            r -= 5.0;
            poly(&E, r) / poly(&F, r)
        };
        if q < 0.0 {
            -x
        } else {
            x
        }
    };

    let dens = density(z);
    if dens > 0.0 {
        // residual Φ(z) − p, evaluated on the side that avoids cancellation
        let resid = if p < 0.5 { phi(z) - p } else { (1.0 - p) - phi_sf(z) };
        z -= resid / dens;
    }
    z
}

// Gauss–Legendre abscissae (negative half) and weights for 6, 12 and 20 points.
const GL6_X: [f64; 3] = [-0.932_469_514_203_152_2, -0.661_209_386_466_264_5, -0.238_619_186_083_197];
const GL6_W: [f64; 3] = [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_691];
const GL12_X: [f64; 6] = [
    -0.981_560_634_246_719_1,
    -0.904_117_256_370_475,
    -0.769_902_674_194_305,
    -0.587_317_954_286_617_1,
    -0.367_831_498_998_180_2,
    -0.125_233_408_511_469_2,
];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const GL20_X: [f64; 10] = [
    -0.993_128_599_185_094_9,
    -0.963_971_927_277_913_8,
    -0.912_234_428_251_325_9,
    -0.839_116_971_822_218_8,
    -0.746_331_906_460_150_8,
    -0.636_053_680_726_515,
    -0.510_867_001_950_827_1,
    -0.373_706_088_715_419_6,
    -0.227_785_851_141_645_1,
    -0.076_526_521_133_497_33,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];

/// P(X > h, Y > k) for finite h, k and |r| < 1 − 1e-12.
fn genz_upper(h: f64, k: f64, r: f64) -> f64 {
    let (xs, ws): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_X, &GL6_W)
    } else if r.abs() < 0.75 {
        (&GL12_X, &GL12_W)
    } else {
        (&GL20_X, &GL20_W)
    };

    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = libm::asin(r);
        for (&x, &w) in xs.iter().zip(ws) {
            for sign in [-1.0, 1.0] {
                let sn = libm::sin(asr * (sign * x + 1.0) / 2.0);
                bvn += w * libm::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / (4.0 * PI) + phi_sf(h) * phi_sf(k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = libm::sqrt(as_);
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * libm::exp(-(bs / as_ + hk) / 2.0)
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = libm::sqrt(bs);
            bvn -= libm::exp(-hk / 2.0)
                * libm::sqrt(2.0 * PI)
                * phi(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (&x, &w) in xs.iter().zip(ws) {
            let xs1 = (a * (x + 1.0)) * (a * (x + 1.0));
            let rs1 = libm::sqrt(1.0 - xs1);
            bvn += a
                * w
                * (libm::exp(-bs / (2.0 * xs1) - hk / (1.0 + rs1)) / rs1
                    - libm::exp(-(bs / xs1 + hk) / 2.0) * (1.0 + c * xs1 * (1.0 + d * xs1)));
            let xs2 = as_ * (1.0 - x) * (1.0 - x) / 4.0;
            let rs2 = libm::sqrt(1.0 - xs2);
            bvn += a
                * w
                * libm::exp(-(bs / xs2 + hk) / 2.0)
                * (libm::exp(-hk * xs2 / (2.0 * (1.0 + rs2) * (1.0 + rs2))) / rs2
                    - (1.0 + c * xs2 * (1.0 + d * xs2)));
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn + phi_sf(h.max(k))
    } else {
        -bvn + (phi_sf(h) - phi_sf(k)).max(0.0)
    }
}

/// P(X > x, Y > y) for a standard bivariate normal with correlation ρ.
/// Infinite arguments are accepted; NaN is rejected.
pub fn bvn_upper_tail(x: f64, y: f64, rho: Correlation) -> Result<f64> {
    if x.is_nan() || y.is_nan() {
        return Err(domain("bivariate normal argument is NaN"));
    }
    Ok(upper(x, y, rho.get()))
}

pub(crate) fn upper(x: f64, y: f64, r: f64) -> f64 {
    if x == f64::INFINITY || y == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return phi_sf(y);
    }
    if y == f64::NEG_INFINITY {
        return phi_sf(x);
    }
    if r >= 1.0 - DEGENERATE_RHO {
        return phi_sf(x.max(y));
    }
    if r <= -1.0 + DEGENERATE_RHO {
        return (phi_sf(x) - phi(y)).max(0.0);
    }
    genz_upper(x, y, r).clamp(0.0, 1.0)
}

pub(crate) fn lower(x: f64, y: f64, r: f64) -> f64 {
    upper(-x, -y, r)
}

/// Φ₂,ρ(x, y) = P(X ≤ x, Y ≤ y). Infinite arguments are accepted as
/// sentinels: Φ₂,ρ(x, +∞) = Φ(x).
pub fn bvn_lower_cdf(x: f64, y: f64, rho: Correlation) -> Result<f64> {
    if x.is_nan() || y.is_nan() {
        return Err(domain("bivariate normal argument is NaN"));
    }
    Ok(lower(x, y, rho.get()))
}

/// 1 − Φ₂,ρ(x, y), computed from tail pieces so that small values keep
/// their relative accuracy.
pub(crate) fn lower_complement(x: f64, y: f64, r: f64) -> f64 {
    let sf_x = if x == f64::NEG_INFINITY { 1.0 } else { phi_sf(x) };
    let sf_y = if y == f64::NEG_INFINITY { 1.0 } else { phi_sf(y) };
    (sf_x + sf_y - upper(x, y, r)).clamp(0.0, 1.0)
}

/// Equicoordinate quantile c with Φ₂,ρ(c, c) = 1 − α.
///
/// Solved by bisection on the bracket [z₁₋α, z₁₋α/2], which always contains
/// the root for ρ ∈ [0, 1].
pub fn equicoordinate_quantile(alpha: f64, rho: Correlation) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(alloc::format!("alpha {alpha} outside (0, 0.5)")));
    }
    let r = rho.get();
    if r < 0.0 {
        return Err(Error::Domain(alloc::format!(
            "equicoordinate quantile needs a nonnegative correlation, got {r}"
        )));
    }
    let z = quantile(1.0 - alpha);
    if r >= 1.0 - DEGENERATE_RHO {
        return Ok(z);
    }

    // exceedance probability, decreasing in c
    let exceed = |c: f64| lower_complement(c, c, r) - alpha;
    let mut lo = z;
    let mut hi = quantile(1.0 - alpha / 2.0);
    let (f_lo, f_hi) = (exceed(lo), exceed(hi));
    if f_lo < -1e-15 || f_hi > 1e-15 {
        return Err(Error::Computation(alloc::format!(
            "equicoordinate root not bracketed for alpha={alpha}, rho={r}"
        )));
    }
    if f_lo <= 0.0 {
        return Ok(lo);
    }
    if f_hi >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if exceed(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
