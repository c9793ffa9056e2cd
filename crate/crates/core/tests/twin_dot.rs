//! Two-terminal dot (eps = 1, mu_L = 0.5, mu_R = -0.5, T = 1, gamma = 1)
//! and its rate-shifted twin. Reference numbers were evaluated independently
//! at 30 digits from the Fermi-function rates.

mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use common::{twin_dot, twin_spec};
use trec::completeness::{
    completeness_test, first_order_record_change, generator_preserving_basis, predictability_test,
    remaining_kernel,
};
use trec::dotlab::{self, build_dot, dot_heat_bounds, dot_relaxation_matrix, dot_stationary, make_twin, DotSpec, DotTotals};
use trec::fcs::{self, cumulants_analytic, cumulants_fd, tilt_derivatives, tilted_generator, CountingField};
use trec::model::{load_network, serialize_network};
use trec::records::{
    entropy_production, mean_record, record_hull_summary, record_interval, stationary_transition_totals,
};
use trec::spectral::{self, kernel_basis, stationary_state};

const F_L: f64 = 0.377_540_668_798_145_4;
const F_R: f64 = 0.182_425_523_806_356_34;
const GAMMA_PLUS: f64 = 0.559_966_192_604_501_8;
const GAMMA_MINUS: f64 = 1.440_033_807_395_498_2;
const P0: f64 = 0.720_016_903_697_749_1;
const P1: f64 = 0.279_983_096_302_250_9;
const U_STATIONARY: f64 = 0.403_185_124_174_510_8;
const HEAT_L: f64 = -0.048_778_786_247_947_27;
const HEAT_TOTAL: f64 = 0.097_557_572_495_894_55;
const ETA: f64 = 0.1;

#[test]
fn channel_rates_and_counts() {
    let net = twin_dot();
    let rates = net.rates();
    let expect = [F_L, F_R, 1.0 - F_L, 1.0 - F_R];
    for (r, e) in rates.iter().zip(expect) {
        assert_relative_eq!(*r, e, epsilon = 1e-15);
    }
    assert_eq!(net.channel_counts(), (4, 2));
    assert!(net.n_records() >= 2);
    let l = net.generator();
    assert_relative_eq!(l.rate(0, 1), GAMMA_PLUS, epsilon = 1e-15);
    assert_relative_eq!(l.rate(1, 0), GAMMA_MINUS, epsilon = 1e-15);
}

#[test]
fn model_file_round_trip() {
    let net = twin_dot();
    let back = load_network(&serialize_network(&net)).unwrap();
    assert_eq!(back, net);
    assert_eq!((back.n_states(), back.n_channels()), (2, 4));
}

#[test]
fn projection_and_record_map() {
    let net = twin_dot();
    let pp = net.projection();
    assert_eq!(pp.p, DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]));
    let d = net.record_map(&["heat_L", "heat_R"]).unwrap();
    assert_eq!(d.d, DMatrix::from_row_slice(2, 4, &[-0.5, 0.0, 0.5, 0.0, 0.0, -1.5, 0.0, 1.5]));
    assert_eq!(kernel_basis(&pp.p, spectral::DEFAULT_TOL).dim(), 2);
}

#[test]
fn stationary_state_matches_closed_form() {
    let net = twin_dot();
    let ss = stationary_state(&net.generator()).unwrap();
    assert_relative_eq!(ss.p[0], P0, epsilon = 1e-14);
    assert_relative_eq!(ss.p[1], P1, epsilon = 1e-14);
    let closed = dot_stationary(&DotTotals::from_network(&net)).unwrap();
    assert!((closed[0] - ss.p[0]).abs() < 1e-10);
}

#[test]
fn relaxation_matrix_is_minus_two() {
    let totals = DotTotals::from_network(&twin_dot());
    let a = dot_relaxation_matrix(&totals);
    assert_relative_eq!(a[(0, 0)], -2.0, epsilon = 1e-15);
}

#[test]
fn heat_currents_and_twin_difference() {
    let net = twin_dot();
    let ss = stationary_state(&net.generator()).unwrap();
    assert_relative_eq!(mean_record(&net, &ss.p, "heat_L").unwrap(), HEAT_L, epsilon = 1e-14);
    let twin = make_twin(&net, 0, "L", "R", ETA).unwrap();
    assert_eq!(twin.generator(), net.generator());
    let a = fcs::mean_currents(&net).unwrap();
    let b = fcs::mean_currents(&twin).unwrap();
    let k = net.record_index("heat_total").unwrap();
    assert_relative_eq!(a[k], HEAT_TOTAL, epsilon = 1e-14);
    assert!((b[k] - a[k] - ETA * P0).abs() < 1e-14);
    assert!((b[k] - a[k] - 0.072_001_690_369_774_91).abs() < 1e-14);
}

#[test]
fn tilted_entries() {
    let net = twin_dot();
    let chi = 0.37;
    let field = CountingField::from_pairs(&net, &[("heat_L", chi)]).unwrap();
    let t = tilted_generator(&net, &field).unwrap();
    assert_relative_eq!(t.matrix[(1, 0)], F_L * (-chi * 0.5f64).exp() + F_R, epsilon = 1e-15);
    let (l_mu, _) = tilt_derivatives(&net, "heat_total", "heat_total").unwrap();
    assert_relative_eq!(l_mu[(1, 0)], -0.462_408_620_108_607_2, epsilon = 1e-15);
}

#[test]
fn null_variation_of_entering_shift() {
    let net = twin_dot();
    let c = [1.0, -1.0, 0.0, 0.0];
    for chi in [0.0, 0.2, -0.7] {
        let field = CountingField::from_pairs(&net, &[("heat_L", chi), ("heat_R", chi)]).unwrap();
        let v = fcs::tilted_null_variation(&net, &c, &field).unwrap();
        let expect = (-chi * 0.5f64).exp() - (-chi * 1.5f64).exp();
        assert_relative_eq!(v[(1, 0)], expect, epsilon = 1e-15);
        assert_eq!(v[(0, 1)], 0.0);
        if chi != 0.0 {
            assert!(v[(1, 0)].abs() > 1e-3);
        } else {
            assert_eq!(v, DMatrix::zeros(2, 2));
        }
    }
}

#[test]
fn noise_differs_between_twins() {
    let net = twin_dot();
    let twin = make_twin(&net, 0, "L", "R", ETA).unwrap();
    let ra = cumulants_analytic(&net).unwrap();
    let rb = cumulants_analytic(&twin).unwrap();
    let idx = [net.record_index("heat_L").unwrap(), net.record_index("heat_R").unwrap()];
    let pick = |s: &DMatrix<f64>| DMatrix::from_fn(2, 2, |i, j| s[(idx[i], idx[j])]);
    let diff = (pick(&ra.noise) - pick(&rb.noise)).norm();
    assert!(diff > 1e-3, "heat noise difference {diff}");

    let fd = cumulants_fd(&net, fcs::DEFAULT_FD_STEP).unwrap();
    let scale = ra.noise.amax();
    assert!((fd.noise - &ra.noise).amax() / scale < 1e-6);
}

#[test]
fn completeness_of_reservoir_heats() {
    let net = twin_dot();
    let d = net.record_map(&["heat_L", "heat_R"]).unwrap();
    let v = completeness_test(&net, &d, 1e-10).unwrap();
    assert!(!v.complete);
    assert_eq!(v.lost_rank, 1);
    let w = v.witness.unwrap();
    assert!((net.projection().p * &w).amax() < 1e-12);
    let resp = v.witness_response.unwrap();
    assert_relative_eq!(resp[0], -0.5, epsilon = 1e-12);
    assert_relative_eq!(resp[1], 1.5, epsilon = 1e-12);
    // the entering block of the witness is the L/R redistribution (1, -1)
    assert!(w[0] > 0.0 && (w[0] + w[1]).abs() < 1e-12);

    let basis = generator_preserving_basis(&net, 1e-10);
    assert_eq!(basis.dim(), 2);
    let s = 1.0 / 2f64.sqrt();
    for target in [[s, -s, 0.0, 0.0], [0.0, 0.0, s, -s]] {
        let t = DVector::from_row_slice(&target);
        let proj = &basis.vectors * (basis.vectors.transpose() * &t);
        assert!((proj - t).amax() < 1e-12);
    }
}

#[test]
fn equal_potentials_are_complete() {
    let net = build_dot(&DotSpec::two_terminal(1.0, 0.5, 0.5, 1.0, 1.0)).unwrap();
    let d = net.record_map(&["heat_total"]).unwrap();
    assert!(completeness_test(&net, &d, 1e-10).unwrap().complete);
}

#[test]
fn remaining_kernel_and_prediction() {
    let net = twin_dot();
    let heat_l = net.record_map(&["heat_L"]).unwrap();
    let heat_r = net.record_map(&["heat_R"]).unwrap();
    let rem = remaining_kernel(&net, &heat_l, 1e-10).unwrap();
    assert_eq!(rem.dim(), 1);
    let v = rem.vector(0);
    assert!((v - DVector::from_row_slice(&[0.5, -0.5, 0.5, -0.5])).amax() < 1e-12);
    assert!(predictability_test(&net, &heat_l, &heat_r, 1e-10).unwrap().complete);

    let none = net.record_map::<&str>(&[]).unwrap();
    assert_eq!(remaining_kernel(&net, &none, 1e-10).unwrap().dim(), 2);
    let verdict = predictability_test(&net, &none, &heat_r, 1e-10).unwrap();
    assert!(!verdict.complete && verdict.witness.is_some());
    assert!(predictability_test(&net, &heat_r, &heat_r, 1e-10).unwrap().complete);

    let both = net.record_map(&["heat_L", "heat_R"]).unwrap();
    // entering and leaving redistributions shift both heats along the same line
    let rem = remaining_kernel(&net, &both, 1e-10).unwrap();
    assert_eq!(rem.dim(), 1);
    assert!((rem.vector(0) - DVector::from_row_slice(&[0.5, -0.5, 0.5, -0.5])).amax() < 1e-12);
    let all = net.record_map(net.records()).unwrap();
    assert_eq!(remaining_kernel(&net, &all, 1e-10).unwrap().dim(), 1);
}

#[test]
fn first_order_change_of_total_heat() {
    let net = twin_dot();
    let ss = stationary_state(&net.generator()).unwrap();
    let x = first_order_record_change(&net, &[1.0, -1.0, 0.0, 0.0], &ss.p, "heat_total").unwrap();
    assert_relative_eq!(x, P0, epsilon = 1e-15);
}

#[test]
fn stationary_totals_and_interval() {
    let net = twin_dot();
    let u = stationary_transition_totals(&net).unwrap();
    assert_relative_eq!(u[0], U_STATIONARY, epsilon = 1e-14);
    assert_relative_eq!(u[1], U_STATIONARY, epsilon = 1e-14);
    let only_in = [u[0], 0.0];
    let iv = record_interval(&net, &only_in, &[("heat_total".into(), 1.0)]).unwrap();
    assert_relative_eq!(iv.lo, -0.604_777_686_261_766_2, epsilon = 1e-14);
    assert_relative_eq!(iv.hi, -0.201_592_562_087_255_4, epsilon = 1e-14);
    assert_eq!(iv.transitions[0].min_channel, Some(1));
    assert_eq!(iv.transitions[0].max_channel, Some(0));

    let hull = record_hull_summary(&net, &u, &["heat_L", "heat_R"]).unwrap();
    assert_eq!(hull[0].points, vec![vec![-0.5 * u[0], 0.0], vec![0.0, -1.5 * u[0]]]);
}

#[test]
fn twin_values_inside_interval() {
    let net = twin_dot();
    let twin = make_twin(&net, 0, "L", "R", ETA).unwrap();
    let u = stationary_transition_totals(&net).unwrap();
    let iv = record_interval(&net, &u, &[("heat_total".into(), 1.0)]).unwrap();
    let k = net.record_index("heat_total").unwrap();
    for n in [&net, &twin] {
        let j = fcs::mean_currents(n).unwrap()[k];
        assert!(iv.contains(j, 1e-12), "{j} not in [{}, {}]", iv.lo, iv.hi);
    }
}

#[test]
fn dot_bounds_match_generic_interval() {
    let spec = twin_spec();
    let net = build_dot(&spec).unwrap();
    let totals = DotTotals::from_network(&net);
    let ss = stationary_state(&net.generator()).unwrap();
    let all = vec![vec!["L".to_string(), "R".to_string()]];
    let b = dot_heat_bounds(&totals, &ss.p, &spec, &all, &all).unwrap();
    let u = stationary_transition_totals(&net).unwrap();
    let iv = record_interval(&net, &u, &[("heat_total".into(), 1.0)]).unwrap();
    assert_eq!(b[0].entering.lo, iv.transitions[0].lo);
    assert_eq!(b[0].entering.hi, iv.transitions[0].hi);
    assert_eq!(b[0].leaving.lo, iv.transitions[1].lo);
    assert_eq!(b[0].leaving.hi, iv.transitions[1].hi);
    assert_eq!(b[0].entering.transitions[0].min_channel, iv.transitions[0].min_channel);
    assert_eq!(b[0].leaving.transitions[0].max_channel, iv.transitions[1].max_channel);
}

#[test]
fn entropy_of_twins() {
    let net = twin_dot();
    let twin = make_twin(&net, 0, "L", "R", ETA).unwrap();
    let p = stationary_state(&net.generator()).unwrap().p;
    let a = entropy_production(&net, &p).unwrap();
    let b = entropy_production(&twin, &p).unwrap();
    assert_eq!(a.coarse, b.coarse);
    assert!((a.resolved - b.resolved).abs() > 1e-6);
    assert!(a.resolved >= a.coarse && b.resolved >= b.coarse);
}

#[test]
fn equilibrium_dot() {
    for spec in [
        DotSpec::two_terminal(1.0, 0.2, 0.2, 0.7, 1.3),
        DotSpec {
            levels: vec![0.4, -0.3],
            reservoirs: vec![dotlab::Reservoir {
                name: "only".into(),
                mu: 0.1,
                temperature: 2.0,
            }],
            couplings: vec![
                dotlab::Coupling {
                    level: 0,
                    reservoir: "only".into(),
                    filter: "a".into(),
                    gamma: 0.5,
                },
                dotlab::Coupling {
                    level: 1,
                    reservoir: "only".into(),
                    filter: "b".into(),
                    gamma: 1.5,
                },
            ],
        },
    ] {
        let net = build_dot(&spec).unwrap();
        let p = stationary_state(&net.generator()).unwrap().p;
        for j in fcs::mean_currents(&net).unwrap() {
            assert!(j.abs() < 1e-12);
        }
        let ep = entropy_production(&net, &p).unwrap();
        assert!(ep.resolved.abs() < 1e-12 && ep.coarse.abs() < 1e-12);
    }
}

#[test]
fn multi_level_counts() {
    for (levels, reservoirs) in [(1, 2), (2, 3), (3, 4)] {
        let spec = DotSpec {
            levels: (0..levels).map(|i| 0.3 * i as f64).collect(),
            reservoirs: (0..reservoirs)
                .map(|r| dotlab::Reservoir {
                    name: format!("r{r}"),
                    mu: 0.1 * r as f64,
                    temperature: 1.0,
                })
                .collect(),
            couplings: (0..levels)
                .flat_map(|i| {
                    (0..reservoirs).map(move |r| dotlab::Coupling {
                        level: i,
                        reservoir: format!("r{r}"),
                        filter: String::new(),
                        gamma: 1.0,
                    })
                })
                .collect(),
        };
        let net = build_dot(&spec).unwrap();
        let (e, e0) = net.channel_counts();
        assert_eq!((e, e0), (2 * levels * reservoirs, 2 * levels));
        assert_eq!(generator_preserving_basis(&net, 1e-10).dim(), 2 * levels * (reservoirs - 1));
    }
}
