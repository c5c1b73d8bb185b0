//! Standard normal density, distribution function, and quantile.
//!
//! The quantile is Wichura's rational approximation (AS 241, PPND16
//! variant), accurate far below the 1e-9 this crate relies on. The
//! distribution function is Hart's double-precision rational
//! approximation.

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    let xabs = x.abs();
    let tail = if xabs > 37.0 {
        0.0
    } else {
        let e = (-0.5 * xabs * xabs).exp();
        if xabs < 7.071_067_811_865_475 {
            let num = (((((3.526_249_659_989_11e-2 * xabs + 0.700_383_064_443_688) * xabs
                + 6.373_962_203_531_65)
                * xabs
                + 33.912_866_078_383)
                * xabs
                + 112.079_291_497_871)
                * xabs
                + 221.213_596_169_931)
                * xabs
                + 220.206_867_912_376;
            let den = ((((((8.838_834_764_831_84e-2 * xabs + 1.755_667_163_182_64) * xabs
                + 16.064_177_579_207)
                * xabs
                + 86.780_732_202_946_1)
                * xabs
                + 296.564_248_779_674)
                * xabs
                + 637.333_633_378_831)
                * xabs
                + 793.826_512_519_948)
                * xabs
                + 440.413_735_824_752;
            e * num / den
        } else {
            let b = xabs + 1.0 / (xabs + 2.0 / (xabs + 3.0 / (xabs + 4.0 / (xabs + 0.65))));
            e / (b * 2.506_628_274_631_000_5)
        }
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Standard normal quantile `Phi^{-1}(p)` for `p` in the open unit interval.
///
/// Values at or outside {0, 1} return the appropriate infinity.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * poly(
                &[
                    3.387_132_872_796_366_5,
                    1.331_416_678_917_843_8e2,
                    1.971_590_950_306_551_3e3,
                    1.373_169_376_550_946_1e4,
                    4.592_195_393_154_987_1e4,
                    6.726_577_092_700_870_4e4,
                    3.343_057_558_358_813e4,
                    2.509_080_928_730_122_7e3,
                ],
                r,
            )
            / poly(
                &[
                    1.0,
                    4.231_333_070_160_091e1,
                    6.871_870_074_920_579e2,
                    5.394_196_021_424_751e3,
                    2.121_379_430_158_659_7e4,
                    3.930_789_580_009_271e4,
                    2.872_908_573_572_194_3e4,
                    5.226_495_278_852_545_6e3,
                ],
                r,
            );
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        poly(
            &[
                1.423_437_110_749_683_6,
                4.630_337_846_156_545_3,
                5.769_497_221_460_691_4,
                3.647_848_324_763_204_6,
                1.270_458_252_452_368_4,
                2.417_807_251_774_506_1e-1,
                2.272_384_498_926_918_4e-2,
                7.745_450_142_783_414e-4,
            ],
            r,
        ) / poly(
            &[
                1.0,
                2.053_191_626_637_758_9,
                1.676_384_830_183_803_8,
                6.897_673_349_851e-1,
                1.481_039_764_274_800_8e-1,
                1.519_866_656_361_645_7e-2,
                5.475_938_084_995_345e-4,
                1.050_750_071_644_416_9e-9,
            ],
            r,
        )
    } else {
        let r = r - 5.0;
        poly(
            &[
                6.657_904_643_501_103_8,
                5.463_784_911_164_114_4,
                1.784_826_539_917_291_3,
                2.965_605_718_285_048_9e-1,
                2.653_218_952_657_612_3e-2,
                1.242_660_947_388_078_4e-3,
                2.711_555_568_743_487_6e-5,
                2.010_334_399_292_288_1e-7,
            ],
            r,
        ) / poly(
            &[
                1.0,
                5.998_322_065_558_879_4e-1,
                1.369_298_809_227_358e-1,
                1.487_536_129_085_061_5e-2,
                7.868_691_311_456_133e-4,
                1.846_318_317_510_054_6e-5,
                1.421_511_758_316_446e-7,
                2.044_263_103_389_939_7e-15,
            ],
            r,
        )
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
