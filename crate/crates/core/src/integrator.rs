//! Dormand–Prince 8(5,3) with adaptive steps.
//!
//! Output is requested on a fixed grid; steps are shortened so that every grid
//! epoch is hit exactly, after which the unclipped step size is restored.

#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on |h|; `0` means unbounded.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: 0.0,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::Config(format!("{name} = {tol} outside (0, 1e-3]")));
            }
        }
        if !(self.max_step >= 0.0) {
            return Err(Error::Config("max_step must be non-negative".into()));
        }
        Ok(())
    }
}

/// Step statistics of one integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

/// Integrate `y' = f(t, y)` from `grid[0]` and return the state at every grid
/// epoch (the first entry is `y0`). The grid must be strictly increasing.
pub fn integrate<F>(
    mut f: F,
    y0: &[f64],
    grid: &[f64],
    settings: &IntegratorSettings,
) -> Result<(Vec<Vec<f64>>, Stats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    settings.validate()?;
    if grid.is_empty() {
        return Err(Error::Invalid("empty output grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("output grid must be strictly increasing".into()));
    }
    let n = y0.len();
    let mut stats = Stats::default();
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.to_vec());
    if grid.len() == 1 {
        return Ok((out, stats));
    }

    let t_end = *grid.last().unwrap();
    let h_max = if settings.max_step > 0.0 {
        settings.max_step
    } else {
        t_end - grid[0]
    };

    let mut k: [Vec<f64>; 12] = std::array::from_fn(|_| vec![0.0; n]);
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut t = grid[0];

    f(t, &y, &mut k[0])?;
    stats.evaluations += 1;
    let mut h = initial_step(&mut f, t, &y, &k[0], settings, h_max, &mut stats)?;
    let mut next_out = 1;
    let mut reject_last = false;

    while next_out < grid.len() {
        if stats.accepted + stats.rejected >= settings.max_steps {
            return Err(Error::Integration(format!(
                "step budget of {} exhausted at t = {t}",
                settings.max_steps
            )));
        }
        let target = grid[next_out];
        let clipped = t + h >= target - 1e-14 * target.abs().max(1.0);
        let h_unclipped = h;
        let step = if clipped { target - t } else { h };
        if step <= 1e-15 * t.abs().max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }

        dop853_step(&mut f, t, &y, step, &mut k, &mut stage, &mut y_new)?;
        stats.evaluations += 11;

        let err = error_norm(&y, &y_new, &k, step, settings);
        if !err.is_finite() {
            // Non-finite error means the trial point left the domain: retreat.
            stats.rejected += 1;
            h = step * 0.25;
            reject_last = true;
            continue;
        }
        let fac11 = err.powf(1.0 / 8.0);
        let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
        let mut h_new = step / fac;

        if err <= 1.0 {
            stats.accepted += 1;
            t = if clipped { target } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            f(t, &y, &mut k[0])?;
            stats.evaluations += 1;
            if reject_last {
                h_new = h_new.min(step);
            }
            reject_last = false;
            if clipped {
                out.push(y.clone());
                next_out += 1;
                h_new = h_new.max(h_unclipped);
            }
            h = h_new.min(h_max);
        } else {
            stats.rejected += 1;
            reject_last = true;
            h = step / (1.0 / FAC_MIN).min(fac11 / SAFE);
        }
    }
    Ok((out, stats))
}

fn error_norm(y: &[f64], y_new: &[f64], k: &[Vec<f64>; 12], h: f64, s: &IntegratorSettings) -> f64 {
    // k[3] holds the 8th-order increment and k[1], k[2] the stages 11 and 12.
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..y.len() {
        let sk = s.abs_tol + s.rel_tol * y[i].abs().max(y_new[i].abs());
        let e2 = k[3][i] - BHH1 * k[0][i] - BHH2 * k[8][i] - BHH3 * k[2][i];
        err2 += (e2 / sk).powi(2);
        let e = ER1 * k[0][i]
            + ER6 * k[5][i]
            + ER7 * k[6][i]
            + ER8 * k[7][i]
            + ER9 * k[8][i]
            + ER10 * k[9][i]
            + ER11 * k[1][i]
            + ER12 * k[2][i];
        err += (e / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    h.abs() * err * (1.0 / (deno * y.len() as f64)).sqrt()
}

fn axpy_stage(stage: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    stage.copy_from_slice(y);
    for &(a, kv) in terms {
        let c = a * h;
        for (s, kk) in stage.iter_mut().zip(kv) {
            *s += c * kk;
        }
    }
}

/// One DOP853 step. On return `k[3]` holds the weighted increment, `k[1]` and
/// `k[2]` stages 11 and 12, and `y_new` the 8th-order solution.
#[allow(clippy::too_many_arguments)]
fn dop853_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>; 12],
    stage: &mut [f64],
    y_new: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    // Stages are stored in k[0..=9] as k1..k10; stage 11 goes to k[1] and
    // stage 12 to k[2] after they are no longer needed, as in the reference
    // implementation.
    macro_rules! eval {
        ($c:expr, $dst:expr, [$(($a:expr, $src:expr)),*]) => {{
            {
                let terms: &[(f64, &[f64])] = &[$(($a, &k[$src][..])),*];
                axpy_stage(stage, y, h, terms);
            }
            f(t + $c * h, stage, &mut k[$dst])?;
        }};
    }
    eval!(C2, 1, [(A21, 0)]);
    eval!(C3, 2, [(A31, 0), (A32, 1)]);
    eval!(C4, 3, [(A41, 0), (A43, 2)]);
    eval!(C5, 4, [(A51, 0), (A53, 2), (A54, 3)]);
    eval!(C6, 5, [(A61, 0), (A64, 3), (A65, 4)]);
    eval!(C7, 6, [(A71, 0), (A74, 3), (A75, 4), (A76, 5)]);
    eval!(C8, 7, [(A81, 0), (A84, 3), (A85, 4), (A86, 5), (A87, 6)]);
    eval!(C9, 8, [(A91, 0), (A94, 3), (A95, 4), (A96, 5), (A97, 6), (A98, 7)]);
    eval!(
        C10,
        9,
        [(A101, 0), (A104, 3), (A105, 4), (A106, 5), (A107, 6), (A108, 7), (A109, 8)]
    );
    eval!(
        C11,
        1,
        [
            (A111, 0),
            (A114, 3),
            (A115, 4),
            (A116, 5),
            (A117, 6),
            (A118, 7),
            (A119, 8),
            (A1110, 9)
        ]
    );
    eval!(
        1.0,
        2,
        [
            (A121, 0),
            (A124, 3),
            (A125, 4),
            (A126, 5),
            (A127, 6),
            (A128, 7),
            (A129, 8),
            (A1210, 9),
            (A1211, 1)
        ]
    );
    for i in 0..y.len() {
        let inc = B1 * k[0][i]
            + B6 * k[5][i]
            + B7 * k[6][i]
            + B8 * k[7][i]
            + B9 * k[8][i]
            + B10 * k[9][i]
            + B11 * k[1][i]
            + B12 * k[2][i];
        k[3][i] = inc;
        y_new[i] = y[i] + h * inc;
    }
    Ok(())
}

/// Hairer's starting step heuristic.
fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    s: &IntegratorSettings,
    h_max: f64,
    stats: &mut Stats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len() as f64;
    let sk: Vec<f64> = y.iter().map(|v| s.abs_tol + s.rel_tol * v.abs()).collect();
    let dnf = f0.iter().zip(&sk).map(|(a, b)| (a / b).powi(2)).sum::<f64>() / n;
    let dny = y.iter().zip(&sk).map(|(a, b)| (a / b).powi(2)).sum::<f64>() / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h, &y1, &mut f1)?;
    stats.evaluations += 1;
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), c)| ((a - b) / c).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    Ok((100.0 * h).min(h1).min(h_max))
}

// Dormand–Prince 8(5,3) tableau (Hairer, Nørsett & Wanner).
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect()
    }

    #[test]
    fn exponential_decay() {
        let g = grid(0.0, 5.0, 10);
        let (ys, stats) = integrate(
            |_, y, dy| {
                dy[0] = -0.7 * y[0];
                Ok(())
            },
            &[2.0],
            &g,
            &IntegratorSettings::default(),
        )
        .unwrap();
        assert_eq!(ys.len(), g.len());
        for (t, y) in g.iter().zip(&ys) {
            let exact = 2.0 * (-0.7 * t).exp();
            assert!((y[0] - exact).abs() < 1e-12 * exact.max(1.0), "t={t}");
        }
        assert!(stats.accepted >= 10);
    }

    #[test]
    fn harmonic_oscillator_many_periods() {
        let tf = 20.0 * std::f64::consts::PI;
        let g = grid(0.0, tf, 40);
        let (ys, _) = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            &[1.0, 0.0],
            &g,
            &IntegratorSettings::default(),
        )
        .unwrap();
        let last = ys.last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-10);
        assert!(last[1].abs() < 1e-10);
    }

    #[test]
    fn tolerance_tightening_converges() {
        let run = |tol: f64| {
            let s = IntegratorSettings {
                rel_tol: tol,
                abs_tol: tol,
                ..Default::default()
            };
            integrate(
                |t, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0] * (1.0 + 0.5 * t.sin());
                    Ok(())
                },
                &[1.0, 0.0],
                &[0.0, 10.0],
                &s,
            )
            .unwrap()
            .0[1]
                .clone()
        };
        let coarse = run(1e-9);
        let fine = run(1e-10);
        let finest = run(1e-13);
        assert!((coarse[0] - finest[0]).abs() < 1e-7);
        assert!((fine[0] - finest[0]).abs() < 1e-8);
    }

    #[test]
    fn errors_propagate_and_grid_validated() {
        let s = IntegratorSettings::default();
        let r = integrate(
            |t, _, _| {
                if t > 0.5 {
                    Err(Error::Domain("left domain".into()))
                } else {
                    Ok(())
                }
            },
            &[0.0],
            &[0.0, 1.0],
            &s,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
        let r = integrate(|_, _, _| Ok(()), &[0.0], &[0.0, 0.0], &s);
        assert!(r.is_err());
        let bad = IntegratorSettings {
            rel_tol: 1e-2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
