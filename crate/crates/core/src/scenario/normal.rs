//! Standard normal CDF and quantile function.
//!
//! The CDF is `erfc(-x / sqrt 2) / 2` with the `libm` port of the FreeBSD
//! `erfc`, accurate to about one ulp. The quantile uses Wichura's AS241
//! (PPND16) rational approximations, relative error near `1e-16`.

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::LevelOutOfRange(u));
    }
    Ok(ppnd16(u))
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[allow(clippy::excessive_precision)]
fn ppnd16(p: f64) -> f64 {
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
        5.226_495_278_852_545_925e3,
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

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from 40-digit arithmetic
    const QUANTILES: [(f64, f64); 5] = [
        (0.975, 1.959_963_984_540_054_2),
        (0.9, 1.281_551_565_544_600_5),
        (0.3, -0.524_400_512_708_040_8),
        (0.02425, -1.972_961_051_311_885),
        (1e-10, -6.361_340_902_404_056),
    ];
    const CDFS: [(f64, f64); 4] = [
        (1.0, 0.841_344_746_068_542_9),
        (-3.0, 1.349_898_031_630_094_5e-3),
        (0.5, 0.691_462_461_274_013_1),
        (-8.0, 6.220_960_574_271_784e-16),
    ];

    #[test]
    fn quantile_reference_values() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        for (u, z) in QUANTILES {
            let got = normal_quantile(u).unwrap();
            assert!((got - z).abs() <= 1e-14 * z.abs().max(1.0), "{u}: {got} vs {z}");
        }
        assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-5);
        for bad in [0.0, 1.0, -1.0, f64::NAN] {
            assert!(normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for (x, c) in CDFS {
            let got = normal_cdf(x);
            assert!((got - c).abs() <= 1e-12 * c, "{x}: {got} vs {c}");
        }
    }

    #[test]
    fn symmetry_and_round_trip() {
        let mut x = -6.0;
        while x <= 6.0 {
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() <= 1e-14);
            let back = normal_quantile(normal_cdf(x)).unwrap();
            assert!((back - x).abs() <= 1e-8, "{x}: {back}");
            x += 0.01;
        }
    }
}
