//! Gauss-Kronrod G7/K15 panels and a recursive adaptive integrator.

/// Kronrod abscissae on `[-1, 1]`, largest first; the last one is zero.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd-indexed Kronrod abscissae `XGK[1], XGK[3], XGK[5], XGK[7]`.
pub(crate) const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 panel points in ascending order as `(abscissa, kronrod weight, gauss weight)`.
pub(crate) fn panel_points() -> [(f64, f64, f64); 15] {
    let mut out = [(0.0, 0.0, 0.0); 15];
    for i in 0..8 {
        let g = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        out[i] = (-XGK[i], WGK[i], g);
        out[14 - i] = (XGK[i], WGK[i], g);
    }
    out
}

/// `(K15, G7)` on `[a, b]`.
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let (mut k, mut g) = (0.0, 0.0);
    for (x, wk, wg) in panel_points() {
        let v = f(mid + half * x);
        k += wk * v;
        g += wg * v;
    }
    (k * half, g * half)
}

/// Globally adaptive K15 integration: the panel with the largest `|K15 - G7|`
/// is bisected until the summed estimate drops below `tol` or the
/// subdivision budget is spent. Returns `(value, error estimate)`.
pub fn adaptive_gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const MAX_PANELS: usize = 2000;
    if a == b {
        return (0.0, 0.0);
    }
    let panel = |lo: f64, hi: f64| {
        let (k, g) = gk15(f, lo, hi);
        (lo, hi, k, (k - g).abs())
    };
    let mut panels = vec![panel(a, b)];
    loop {
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= tol || panels.len() >= MAX_PANELS {
            break;
        }
        // first panel with the largest error, so ties resolve deterministically
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |w, (i, p)| if p.3 > panels[w].3 { i } else { w });
        let (lo, hi, _, e) = panels[worst];
        let mid = 0.5 * (lo + hi);
        if e == 0.0 || mid <= lo || mid >= hi {
            break;
        }
        panels[worst] = panel(lo, mid);
        panels.insert(worst + 1, panel(mid, hi));
    }
    let value = panels.iter().map(|p| p.2).sum();
    let err = panels.iter().map(|p| p.3).sum();
    (value, err)
}

/// Adaptive integration over consecutive pieces `[p_0, p_1], [p_1, p_2], ...`.
pub fn adaptive_pieces(f: &impl Fn(f64) -> f64, points: &[f64], tol: f64) -> (f64, f64) {
    let pieces = points.len().saturating_sub(1).max(1) as f64;
    points
        .windows(2)
        .map(|w| adaptive_gk15(f, w[0], w[1], tol / pieces))
        .fold((0.0, 0.0), |(v, e), (dv, de)| (v + dv, e + de))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let pts = panel_points();
        let k: f64 = pts.iter().map(|p| p.1).sum();
        let g: f64 = pts.iter().map(|p| p.2).sum();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
        assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn exact_for_low_degree_polynomials() {
        let (k, g) = gk15(&|x: f64| x.powi(13) + x.powi(6), -1.0, 2.0);
        let exact = (2f64.powi(14) - 1.0) / 14.0 + (2f64.powi(7) + 1.0) / 7.0;
        assert!((k - exact).abs() < 1e-10);
        assert!((g - exact).abs() < 1e-10);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let (v, e) = adaptive_gk15(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-11);
        assert!(e < 1e-11);
    }
}
