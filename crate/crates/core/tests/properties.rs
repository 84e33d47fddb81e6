//! Property-based invariants across the core modules.

mod common;

use std::collections::{BTreeMap, VecDeque};

use hydrostate::exact_arith;
use hydrostate::hydraulics::{symmetric_expansion, CONSTRUCTION_TOLERANCE, SOLVER_TOLERANCE};
use hydrostate::observability::{classify_with_framing, FlowFraming};
use hydrostate::structure::{cycle_space_basis_for, IMAGE_TOLERANCE};
use hydrostate::testkit::{random_connected_wds, random_ground_truth_state, GeneratorConfig};
use hydrostate::{
    complete, complete_from_forest_flows, complete_from_heads, complete_from_reservoir_heads_and_flows,
    head_loss, image_membership, incidence_matrix, invert_head_loss, monotonicity_gap, residuals, resistance,
    select_independent_edges, solve_reservoir_heads_demands, submatrix_rank, CompletionError, CompletionOptions,
    ImageMembership, InitialStrategy, Network, ObservationSet, PipeParams, SolverOptions, Verdict,
};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{max_abs_diff, random_network, Components, HEAD_RANGE};

fn network(max_nodes: usize) -> impl Strategy<Value = Network> {
    any::<u64>().prop_map(move |seed| random_network(seed, 3, max_nodes))
}

fn net_and_state(max_nodes: usize) -> impl Strategy<Value = (Network, hydrostate::HydraulicState)> {
    (any::<u64>(), any::<u64>()).prop_map(move |(s1, s2)| {
        let net = random_network(s1, 3, max_nodes);
        let state = random_ground_truth_state(&net, s2, HEAD_RANGE);
        (net, state)
    })
}

/// Rank over `Q` by Gauss-Jordan on exact rationals.
fn rational_rank(m: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<Ratio<i128>>> =
        m.iter().map(|r| r.iter().map(|&v| Ratio::from_integer(v as i128)).collect()).collect();
    let cols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).find(|&r| a[r][c] != Ratio::from_integer(0)) else { continue };
        a.swap(p, rank);
        let pivot = a[rank][c];
        for r in 0..a.len() {
            if r != rank && a[r][c] != Ratio::from_integer(0) {
                let f = a[r][c] / pivot;
                for k in 0..cols {
                    let sub = f * a[rank][k];
                    a[r][k] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Fundamental cycle of `chord` found by walking the forest, with all
/// reservoirs merged into one ground vertex.
fn walked_cycle(net: &Network, forest: &[usize], chord: usize) -> Vec<i64> {
    let ground = net.node_count();
    let class = |v: usize| if net.is_consumer(v) { v } else { ground };
    let mut adjacent = vec![Vec::new(); ground + 1];
    for &e in forest {
        let p = &net.pipes()[e];
        adjacent[class(p.tail)].push((e, class(p.head), 1i64));
        adjacent[class(p.head)].push((e, class(p.tail), -1i64));
    }
    let c = &net.pipes()[chord];
    let (from, to) = (class(c.head), class(c.tail));
    let mut came_by: Vec<Option<(usize, usize, i64)>> = vec![None; ground + 1];
    let mut seen = vec![false; ground + 1];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(e, w, sign) in &adjacent[u] {
            if !seen[w] {
                seen[w] = true;
                came_by[w] = Some((u, e, sign));
                queue.push_back(w);
            }
        }
    }
    let mut v = vec![0i64; net.pipe_count()];
    v[chord] = 1;
    let mut at = to;
    while at != from {
        let (prev, e, sign) = came_by[at].expect("forest connects every consumer to ground");
        v[e] += sign;
        at = prev;
    }
    v
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

fn observe(net: &Network, state: &hydrostate::HydraulicState, heads: &[usize], flows: &[usize], demands: &[usize]) -> ObservationSet {
    let mut obs = ObservationSet::default();
    for &v in heads {
        obs.known_heads.insert(net.nodes()[v].id.clone(), state.heads[v]);
    }
    for &e in flows {
        obs.known_flows.insert(net.pipes()[e].id.clone(), state.flows[e]);
    }
    for &c in demands {
        obs.known_demands.insert(net.nodes()[net.consumers()[c]].id.clone(), state.demands[c]);
    }
    obs
}

/// Random observation subsets drawn with per-kind inclusion rates.
fn random_keys(net: &Network, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let heads = (0..net.node_count())
        .filter(|&v| rng.random_bool(if net.is_consumer(v) { rates[0] * rates[0] } else { rates[1].sqrt() }))
        .collect();
    let flows = (0..net.pipe_count()).filter(|_| rng.random_bool(rates[2])).collect();
    let demands = (0..net.consumer_count()).filter(|_| rng.random_bool(rates[3])).collect();
    (heads, flows, demands)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn incidence_columns_sum_to_zero(net in network(40)) {
        let b = incidence_matrix(&net);
        prop_assert!(b.column_sums().iter().all(|&s| s == 0));
        for col in 0..b.cols() {
            let nonzero: Vec<i8> = (0..b.rows()).map(|r| b.get(r, col)).filter(|&v| v != 0).collect();
            prop_assert_eq!(nonzero.len(), 2);
        }
    }

    #[test]
    fn full_incidence_rank_is_nodes_minus_one(net in network(40)) {
        let dense = incidence_matrix(&net).to_dense();
        prop_assert_eq!(exact_arith::rank(&dense), net.node_count() - 1);
        let all: Vec<usize> = (0..net.node_count()).collect();
        prop_assert!(submatrix_rank(&incidence_matrix(&net), &all).is_err());
    }

    #[test]
    fn proper_subsets_have_full_row_rank(net in network(40), picks in prop::collection::vec(any::<bool>(), 40)) {
        let n = net.node_count();
        let mut rows: Vec<usize> = (0..n).filter(|&v| picks[v]).collect();
        if rows.is_empty() { rows.push(0); }
        if rows.len() == n { rows.pop(); }
        let b = incidence_matrix(&net);
        prop_assert_eq!(submatrix_rank(&b, &rows).unwrap(), rows.len());
        let cols: Vec<usize> = (0..net.pipe_count()).collect();
        prop_assert_eq!(rational_rank(&b.submatrix(&rows, &cols)), rows.len());
    }

    #[test]
    fn bareiss_rank_matches_rational_rank(m in prop::collection::vec(prop::collection::vec(-3i64..=3, 6), 1..7)) {
        prop_assert_eq!(exact_arith::rank(&m), rational_rank(&m));
    }

    #[test]
    fn resistance_monotone(l in 1.0..1e4f64, d in 0.05..2.0f64, eta in 60.0..160.0f64, k in 1.01..3.0f64) {
        let base = resistance(&PipeParams::new(l, d, eta));
        prop_assert!(resistance(&PipeParams::new(l * k, d, eta)) > base);
        prop_assert!(resistance(&PipeParams::new(l, d * k, eta)) < base);
        prop_assert!(resistance(&PipeParams::new(l, d, eta * k)) < base);
    }

    #[test]
    fn independent_edges_form_forest(net in network(40)) {
        let dec = select_independent_edges(&net);
        prop_assert_eq!(dec.independent.len(), net.consumer_count());
        let mut comps = Components::new(net.node_count());
        for &e in &dec.independent {
            let p = &net.pipes()[e];
            prop_assert!(comps.join(p.tail, p.head));
        }
        let b = incidence_matrix(&net);
        prop_assert_ne!(exact_arith::determinant(&b.submatrix(net.consumers(), &dec.independent)), 0);
    }

    #[test]
    fn independent_edges_match_greedy_rank(net in network(25)) {
        let b = incidence_matrix(&net);
        let mut chosen = Vec::new();
        let mut rank = 0;
        for e in 0..net.pipe_count() {
            chosen.push(e);
            let r = exact_arith::rank(&b.submatrix(net.consumers(), &chosen));
            if r > rank { rank = r; } else { chosen.pop(); }
        }
        prop_assert_eq!(select_independent_edges(&net).independent, chosen);
    }

    #[test]
    fn cycle_basis_is_kernel_of_fundamental_cycles(net in network(40)) {
        let dec = select_independent_edges(&net);
        let basis = cycle_space_basis_for(&net, &dec);
        prop_assert_eq!(basis.dimension(), net.pipe_count() - net.consumer_count());
        let b_vc = incidence_matrix(&net).restrict_rows(net.consumers());
        for (v, &chord) in basis.vectors.iter().zip(&dec.dependent) {
            prop_assert!(exact_arith::mul_vec(&b_vc, v).iter().all(|&x| x == 0));
            prop_assert_eq!(v, &walked_cycle(&net, &dec.independent, chord));
        }
    }

    #[test]
    fn image_membership_is_injective(net in network(40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<f64> = (0..net.consumer_count()).map(|_| rng.random_range(-200.0..200.0)).collect();
        let target: Vec<f64> = net.pipes().iter().map(|p| {
            let at = |v: usize| net.consumer_position(v).map_or(0.0, |i| h[i]);
            at(p.tail) - at(p.head)
        }).collect();
        match image_membership(&net, &target, IMAGE_TOLERANCE) {
            ImageMembership::Member { consumer_heads, .. } => {
                prop_assert!(max_abs_diff(&consumer_heads, &h) <= 1e-10);
            }
            other => prop_assert!(false, "rejected {:?}", other),
        }
    }

    #[test]
    fn head_loss_round_trip(q in -1e3..1e3f64, r in 1e-3..1e3f64) {
        let back = invert_head_loss(head_loss(q, r), r);
        prop_assert!((back - q).abs() <= 1e-9 * q.abs().max(1.0));
    }

    #[test]
    fn head_loss_sign(q in -1e3..1e3f64, r in 1e-3..1e3f64) {
        let h = head_loss(q, r);
        prop_assert_eq!(h.signum(), if q == 0.0 { h.signum() } else { q.signum() });
        if q == 0.0 { prop_assert_eq!(h, 0.0); }
    }

    #[test]
    fn monotonicity_gap_positive(net in network(40), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q1: Vec<f64> = (0..net.pipe_count()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut q2 = q1.clone();
        let e = rng.random_range(0..net.pipe_count());
        q2[e] += rng.random_range(1e-7..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        prop_assert!(monotonicity_gap(&net, &q1, &q2) > 0.0);
        prop_assert_eq!(monotonicity_gap(&net, &q1, &q1), 0.0);
    }

    #[test]
    fn monotonicity_gap_integral_identity(q1 in -50.0..50.0f64, q2 in -50.0..50.0f64, r in 0.1..1e3f64) {
        prop_assume!((q1 - q2).abs() > 1e-6);
        let net = common::single_pipe(r);
        let r = net.pipes()[0].resistance;
        let x = hydrostate::network::HAZEN_WILLIAMS_EXPONENT;
        let f = |t: f64| (q2 + t * (q1 - q2)).abs().powf(x - 1.0);
        // split at the sign change of the integrand's base
        let crossing = q2 / (q2 - q1);
        let integral = if crossing > 0.0 && crossing < 1.0 {
            simpson(&f, 0.0, crossing, 1e-13, 50) + simpson(&f, crossing, 1.0, 1e-13, 50)
        } else {
            simpson(&f, 0.0, 1.0, 1e-13, 50)
        };
        let expected = x * r * (q1 - q2).powi(2) * integral;
        let gap = monotonicity_gap(&net, &[q1], &[q2]);
        prop_assert!((gap - expected).abs() <= 1e-6 * expected.abs(), "gap {} vs {}", gap, expected);
    }

    #[test]
    fn symmetric_expansion_doubles_net_form((net, state) in net_and_state(40)) {
        let sym = symmetric_expansion(&net, &state.flows);
        for pair in sym.flows.chunks(2) {
            prop_assert_eq!(pair[0], -pair[1]);
        }
        for (out, &d) in sym.consumer_outflow(&net).iter().zip(&state.demands) {
            prop_assert!((out + 2.0 * d).abs() <= 1e-12);
        }
    }

    #[test]
    fn generated_networks_validate(seed in any::<u64>(), r in 1usize..4, c in 1usize..30, extra in 0usize..20) {
        let nodes = r + c;
        prop_assume!(extra <= hydrostate::testkit::MAX_PARALLEL_PER_PAIR * nodes * (nodes - 1) / 2);
        let net = random_connected_wds(&GeneratorConfig::new(seed, r, c, extra)).unwrap();
        prop_assert!(hydrostate::build_network(&net.to_spec()).is_ok());
        let text = serde_json::to_string(&net.to_spec()).unwrap();
        let again = Network::from_json(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&again.to_spec()).unwrap(), text);
        let state = random_ground_truth_state(&net, seed, HEAD_RANGE);
        prop_assert!(residuals(&net, &state).unwrap().is_physically_correct(CONSTRUCTION_TOLERANCE));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_closure((net, truth) in net_and_state(30)) {
        let h_r = net.reservoir_heads(&truth.heads);

        let a = complete_from_reservoir_heads_and_flows(&net, &h_r, &truth.flows, IMAGE_TOLERANCE).unwrap();
        prop_assert!(max_abs_diff(&a.state.heads, &truth.heads) <= 1e-8);

        let dec = select_independent_edges(&net);
        let forest: BTreeMap<usize, f64> = dec.independent.iter().map(|&e| (e, truth.flows[e])).collect();
        let b = complete_from_forest_flows(&net, &h_r, &forest, &dec).unwrap();
        prop_assert!(max_abs_diff(&b.state.heads, &truth.heads) <= 1e-8);
        prop_assert!(max_abs_diff(&b.state.flows, &truth.flows) <= 1e-8);
        prop_assert!(max_abs_diff(&b.state.demands, &truth.demands) <= 1e-8);

        let c = solve_reservoir_heads_demands(&net, &h_r, &truth.demands, &SolverOptions::default()).unwrap();
        prop_assert!(max_abs_diff(&c.state.heads, &truth.heads) <= 1e-6);
        prop_assert!(max_abs_diff(&c.state.flows, &truth.flows) <= 1e-6);

        let all = complete_from_heads(&net, &truth.heads).unwrap();
        for report in [&a, &b, &all] {
            prop_assert!(report.final_residual.is_physically_correct(CONSTRUCTION_TOLERANCE));
        }
        prop_assert!(c.final_residual.is_physically_correct(SOLVER_TOLERANCE));
    }

    #[test]
    fn newton_multi_start_agrees((net, truth) in net_and_state(30), seed in any::<u64>()) {
        let h_r = net.reservoir_heads(&truth.heads);
        let base = solve_reservoir_heads_demands(&net, &h_r, &truth.demands, &SolverOptions::default()).unwrap();
        for k in 0..5 {
            let opts = SolverOptions {
                initial_strategy: InitialStrategy::Random { seed: seed.wrapping_add(k) },
                ..SolverOptions::default()
            };
            let other = solve_reservoir_heads_demands(&net, &h_r, &truth.demands, &opts).unwrap();
            prop_assert!(max_abs_diff(&other.state.heads, &base.state.heads) <= 1e-6);
            prop_assert!(max_abs_diff(&other.state.flows, &base.state.flows) <= 1e-6);
        }
    }

    #[test]
    fn chord_perturbation_detected((net, truth) in net_and_state(30), pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        let dec = select_independent_edges(&net);
        prop_assume!(!dec.dependent.is_empty());
        let chord = dec.dependent[pick.index(dec.dependent.len())];
        let h_r = net.reservoir_heads(&truth.heads);
        let mut flows = truth.flows.clone();
        flows[chord] += if up { 1e-3 } else { -1e-3 };
        let outcome = complete_from_reservoir_heads_and_flows(&net, &h_r, &flows, IMAGE_TOLERANCE);
        let rejected = matches!(outcome, Err(CompletionError::InconsistentObservations { .. }));
        prop_assert!(rejected, "accepted a perturbed chord");
    }

    #[test]
    fn classifier_sound((net, truth) in net_and_state(25), seed in any::<u64>()) {
        let (heads, flows, demands) = random_keys(&net, seed);
        let obs = observe(&net, &truth, &heads, &flows, &demands);
        let opts = CompletionOptions::default();
        for framing in [FlowFraming::Forest, FlowFraming::FullFlows] {
            let v = classify_with_framing(&net, &obs, framing).unwrap();
            match v.verdict {
                verdict if verdict.is_determined() => {
                    let report = complete(&net, &obs, verdict.theorem().unwrap(), &opts).unwrap();
                    prop_assert!(max_abs_diff(&report.state.heads, &truth.heads) <= 1e-6);
                    prop_assert!(max_abs_diff(&report.state.flows, &truth.flows) <= 1e-6);
                }
                Verdict::ConditionallyDeterminedFlows => {
                    prop_assert!(complete(&net, &obs, hydrostate::Theorem::HeadsAndFlows, &opts).is_ok());
                    let dec = select_independent_edges(&net);
                    if let Some(&chord) = dec.dependent.first() {
                        let mut bad = obs.clone();
                        *bad.known_flows.get_mut(&net.pipes()[chord].id).unwrap() += 1e-3;
                        let err = complete(&net, &bad, hydrostate::Theorem::HeadsAndFlows, &opts);
                        let rejected = matches!(err, Err(CompletionError::InconsistentObservations { .. }));
                        prop_assert!(rejected);
                    }
                }
                Verdict::UndeterminedRankDeficient => {
                    prop_assert!(v.flow_rank < net.consumer_count());
                    let b = incidence_matrix(&net);
                    let rank = if flows.is_empty() { 0 } else { exact_arith::rank(&b.submatrix(net.consumers(), &flows)) };
                    prop_assert!(rank < net.consumer_count());
                }
                _ => {}
            }
        }
    }

    #[test]
    fn classifier_monotone_in_information((net, truth) in net_and_state(25), seed in any::<u64>(), extra in any::<u64>()) {
        let (heads, flows, demands) = random_keys(&net, seed);
        let (more_h, more_f, more_d) = random_keys(&net, extra);
        let merge = |a: &[usize], b: &[usize]| {
            let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let small = observe(&net, &truth, &heads, &flows, &demands);
        let large = observe(&net, &truth, &merge(&heads, &more_h), &merge(&flows, &more_f), &merge(&demands, &more_d));
        for framing in [FlowFraming::Forest, FlowFraming::FullFlows] {
            let before = classify_with_framing(&net, &small, framing).unwrap().verdict;
            let after = classify_with_framing(&net, &large, framing).unwrap().verdict;
            if before.is_determined() {
                let demoted = matches!(after, Verdict::UndeterminedRankDeficient | Verdict::NotCovered);
                prop_assert!(!demoted, "{:?} became {:?}", before, after);
            }
        }
    }

    #[test]
    fn observation_json_idempotent((net, truth) in net_and_state(20)) {
        let obs = ObservationSet::from_state(&net, &truth);
        let text = serde_json::to_string(&obs).unwrap();
        let back = ObservationSet::from_json(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        prop_assert_eq!(back.to_state(&net).unwrap(), truth);
    }
}
