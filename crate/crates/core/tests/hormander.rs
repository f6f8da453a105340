use hhlab::detsys::{detect_orbit, ORBIT_DT};
use hhlab::diffusion::{InputDiffusionSpec, State5};
use hhlab::gating::State4;
use hhlab::hormander::*;
use hhlab::signal::SignalSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn rel_err(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    let floor = 1e-6 * a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(floor)).fold(0.0, f64::max)
}

fn random_state(rng: &mut impl Rng, zeta: (f64, f64)) -> State5 {
    let y = State4::probe(
        rng.random_range(-15.0..100.0),
        rng.random_range(0.02..0.98),
        rng.random_range(0.02..0.98),
        rng.random_range(0.02..0.98),
    );
    State5::probe(y, rng.random_range(zeta.0..zeta.1))
}

#[test]
fn closed_form_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sig = SignalSpec::sinusoid(2.0, 10.0).unwrap();
    let specs = [InputDiffusionSpec::ou(0.5, 1.0).unwrap(), InputDiffusionSpec::cir(0.5, 1.0, 8.0).unwrap()];
    let cases: Vec<_> = (0..100)
        .flat_map(|_| {
            let t = rng.random_range(0.0..10.0);
            let x = random_state(&mut rng, (-3.0, 5.0));
            specs.map(|s| (t, x, s))
        })
        .collect();
    let worst = cases
        .par_iter()
        .map(|(t, x, spec)| {
            let a = brackets_closed_form(*t, x, spec, &sig);
            let b = brackets_numeric_oracle(*t, x, spec, &sig);
            let mut w = rel_err(&a.sigma, &b.sigma);
            for k in 0..4 {
                w = w.max(rel_err(&a.v[k], &b.v[k]));
                assert!((a.a[k] - b.a[k]).abs() <= 1e-5 * a.a[k].abs().max(1e-6 * b.v[k].iter().fold(0.0f64, |m, c| m.max(c.abs()))));
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst < 1e-5, "worst componentwise error {worst:e}");
}

#[test]
fn normalized_determinant_is_scale_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let s = random_state(&mut rng, (0.0, 1.0)).project();
        let nd = normalized_determinant(&s);
        assert!(nd.abs() <= 1.0 + 1e-12);
        assert_eq!(nd.signum(), determinant_d(&s).signum());
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn determinant_is_multilinear_in_gates() {
    // degree ≤ 3 in (n, m, h), one power each: trilinear interpolation from
    // the 2³ corners is exact; the 4³ grid checks that as well.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let v = rng.random_range(-20.0..60.0);
        let nodes = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        let mut table = [[[0.0; 4]; 4]; 4];
        for (i, n) in nodes.iter().enumerate() {
            for (j, m) in nodes.iter().enumerate() {
                for (k, h) in nodes.iter().enumerate() {
                    table[i][j][k] = determinant_d(&State4::probe(v, *n, *m, *h));
                }
            }
        }
        let lagrange = |x: f64, i: usize| -> f64 {
            (0..4).filter(|&j| j != i).map(|j| (x - nodes[j]) / (nodes[i] - nodes[j])).product()
        };
        let scale = table.iter().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for _ in 0..20 {
            let (n, m, h) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let mut interp = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        interp += table[i][j][k] * lagrange(n, i) * lagrange(m, j) * lagrange(h, k);
                    }
                }
            }
            let exact = determinant_d(&State4::probe(v, n, m, h));
            assert!((interp - exact).abs() < 1e-10 * scale.max(f64::MIN_POSITIVE), "{interp} vs {exact}");
        }
    }
}

/// `∂ᵏG/∂vᵏ` at fixed gate value for k = 2, 3, 4 from central differences of
/// the rates, with two Richardson rounds.
fn fd_rows(s: &State4) -> [[f64; 3]; 3] {
    use hhlab::gating::{rates, RateKind};
    let x = [s.n, s.m, s.h];
    std::array::from_fn(|k| {
        let kind = RateKind::ALL[k];
        let g = |u: f64| {
            let (a, b) = rates(kind, s.v + u);
            a * (1.0 - x[k]) - b * x[k]
        };
        let stencils = |h: f64| {
            let (p2, p1, z, m1, m2) = (g(2.0 * h), g(h), g(0.0), g(-h), g(-2.0 * h));
            [
                (p1 - 2.0 * z + m1) / (h * h),
                (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h),
                (p2 - 4.0 * p1 + 6.0 * z - 4.0 * m1 + m2) / (h * h * h * h),
            ]
        };
        // D cancels heavily; large steps keep rounding below the truncation error
        let h = 1.6;
        let (c1, c2, c4) = (stencils(h), stencils(h / 2.0), stencils(h / 4.0));
        std::array::from_fn(|i| {
            let r1 = (4.0 * c2[i] - c1[i]) / 3.0;
            let r2 = (4.0 * c4[i] - c2[i]) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
    })
}

#[test]
fn determinant_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let s = random_state(&mut rng, (0.0, 1.0)).project();
        let rows = fd_rows(&s);
        let fd = nalgebra::Matrix3::from_fn(|i, j| rows[i][j]).determinant();
        let d = determinant_d(&s);
        assert!((fd - d).abs() < 1e-5 * d.abs(), "{fd} vs {d} at {s:?}");
    }
}

#[test]
fn equilibrium_scan_roots_are_refined() {
    let zeros = scan_equilibrium_curve(-15.0, 30.0, 2000).unwrap();
    assert!(!zeros.is_empty());
    for z in zeros {
        let h = 1e-3;
        let scale = determinant_on_equilibria(z - h).abs().max(determinant_on_equilibria(z + h).abs());
        assert!(determinant_on_equilibria(z).abs() < 1e-8 * scale);
        assert!(determinant_on_equilibria(z - h) * determinant_on_equilibria(z + h) < 0.0);
    }
}

#[test]
fn rest_point_reports_full_rank() {
    let sig = SignalSpec::constant(0.0).unwrap();
    let spec = InputDiffusionSpec::ou(0.5, 1.0).unwrap();
    let x = State5::probe(State4::on_steady_state_curve(0.0), 0.0);
    let r = hormander_report(0.0, &x, &spec, &sig, DEFAULT_TOL_D);
    assert!(r.d_value < 0.0 && r.in_o);
    assert!(r.min_singular_value > 0.0 && r.v_l_gram > 0.0);
}

#[test]
fn rank_collapses_at_scan_zero() {
    let sig = SignalSpec::constant(0.0).unwrap();
    let spec = InputDiffusionSpec::ou(0.5, 1.0).unwrap();
    let z = scan_equilibrium_curve(-15.0, 30.0, 2000).unwrap()[0];
    let sv = |v: f64| {
        let x = State5::probe(State4::on_steady_state_curve(v), 0.0);
        hormander_report(0.0, &x, &spec, &sig, DEFAULT_TOL_D).min_singular_value
    };
    let (far, near, nearer) = (sv(z - 1.0), sv(z - 1e-2), sv(z - 1e-4));
    assert!(nearer < near && near < far, "{far} {near} {nearer}");
}

#[test]
fn rank_agrees_with_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sig = SignalSpec::sinusoid(2.0, 10.0).unwrap();
    let specs = [InputDiffusionSpec::ou(0.5, 1.0).unwrap(), InputDiffusionSpec::cir(0.5, 1.0, 8.0).unwrap()];
    let mut disagreements = 0;
    for i in 0..1000 {
        let x = random_state(&mut rng, (-3.0, 5.0));
        let t = rng.random_range(0.0..10.0);
        let r = hormander_report(t, &x, &specs[i % 2], &sig, DEFAULT_TOL_D);
        if (r.min_singular_value > 1e-8) != r.in_o {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0);
}

#[test]
fn orbit_scan_shape() {
    let o = detect_orbit(&SignalSpec::constant(15.0).unwrap(), 150.0, 250.0, ORBIT_DT).unwrap();
    let s = scan_orbit(&o).unwrap();
    let (a, b) = s.segment.unwrap();
    let n = s.d.len();
    let mut i = a;
    loop {
        assert!(s.d[i] < -0.05 * s.max_abs_d, "v = {}, D/max|D| = {}", s.v[i], s.d[i] / s.max_abs_d);
        if i == b {
            break;
        }
        i = (i + 1) % n;
    }
    assert!(s.sign_changes_outside >= 2);
}
