//! State invariants, node algebra and the Markov property of both models.

mod common;

use metanet_core::ctm::CtmS;
use metanet_core::metanet::MetanetS;
use metanet_core::network::SectionInit;
use metanet_core::node::{gather, scatter, NodeInflow, SplitTable};
use metanet_core::queue::{permit, DownstreamView};
use metanet_core::{run_spec, Model, ModelKind, Network, NetworkSpec, RunOptions, SimState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(spec: &NetworkSpec, kind: ModelKind) -> Box<dyn Model> {
    let net = Network::new(spec.clone()).unwrap();
    match kind {
        ModelKind::MetanetS => Box::new(MetanetS::new(net)),
        ModelKind::CtmS => Box::new(CtmS::new(net).unwrap()),
    }
}

fn check_state(net: &Network, state: &SimState) -> Result<(), String> {
    for (link, secs) in net.spec.freeway.iter().zip(&state.freeway) {
        for (i, s) in secs.iter().enumerate() {
            let at = format!("{}[{i}] at step {}", link.id, state.step);
            if !(s.density >= 0.0 && s.density.is_finite() && s.speed.is_finite()) {
                return Err(format!("{at}: density {} speed {}", s.density, s.speed));
            }
            let parts: f64 = s.partial.iter().sum();
            if (parts - s.density).abs() > 1e-9 * s.density.max(1.0) {
                return Err(format!("{at}: partial densities sum {parts} vs {}", s.density));
            }
            let gamma: f64 = s.composition.iter().sum();
            if (gamma - 1.0).abs() > 1e-9 || s.composition.iter().any(|g| *g < 0.0) {
                return Err(format!("{at}: composition {:?}", s.composition));
            }
        }
    }
    for (q, spec) in state.queues.iter().zip(&net.spec.queue) {
        let parts: f64 = q.partial.iter().sum();
        if q.queue < 0.0 || q.partial.iter().any(|w| *w < 0.0) || (parts - q.queue).abs() > 1e-9 * q.queue.max(1.0) {
            return Err(format!("{} at step {}: queue {} partial {:?}", spec.id, state.step, q.queue, q.partial));
        }
    }
    for (st, spec) in state.stations.iter().zip(&net.spec.station) {
        if !(0.0 <= st.exit_queue && st.exit_queue <= st.occupancy && st.occupancy <= spec.max_occupancy) {
            return Err(format!("{} at step {}: w {} l {}", spec.id, state.step, st.exit_queue, st.occupancy));
        }
    }
    let d = &state.diagnostics;
    let residual = net.stored_vehicles(state) + d.exited - d.entered - net.stored_vehicles(&net.initial_state());
    if residual.abs() > 1e-6 {
        return Err(format!("conservation residual {residual} at step {}", state.step));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_networks_keep_invariants(seed in any::<u64>(), ctm in any::<bool>()) {
        let spec = common::random_scenario(&mut ChaCha8Rng::seed_from_u64(seed), 2000);
        let kind = if ctm { ModelKind::CtmS } else { ModelKind::MetanetS };
        let m = model(&spec, kind);
        let mut state = m.initial_state();
        for _ in 0..spec.horizon {
            m.step(&mut state).unwrap();
            if let Err(e) = check_state(m.network(), &state) {
                prop_assert!(false, "{}", e);
            }
        }
    }

    #[test]
    fn node_conserves_and_is_linear(
        flows in prop::collection::vec(0.0..5000.0f64, 1..4),
        shares in prop::collection::vec(0.0..1.0f64, 3),
        split in 0.0..1.0f64,
        factor in 0.0..10.0f64,
    ) {
        // Three destinations; every input carries all of them.
        let total_share: f64 = shares.iter().sum::<f64>().max(1e-9);
        let composition: Vec<f64> = shares.iter().map(|s| s / total_share).collect();
        let dests = [0usize, 1, 2];
        let inflows: Vec<NodeInflow<'_>> = flows
            .iter()
            .map(|&flow| NodeInflow { flow, composition: &composition, destinations: &dests })
            .collect();
        let totals = gather(&inflows, 3);
        let input: f64 = flows.iter().sum();
        prop_assert!((totals.iter().sum::<f64>() - input).abs() <= 1e-9 * input.max(1.0));

        // Destination 0 splits over both outputs, 1 and 2 each use one.
        let splits = SplitTable { rates: vec![vec![split, 1.0 - split], vec![1.0, 0.0], vec![0.0, 1.0]] };
        let outs_dests: [&[usize]; 2] = [&[0, 1], &[0, 2]];
        let outs = scatter(&totals, &splits, &outs_dests);
        let output: f64 = outs.iter().map(|o| o.flow).sum();
        prop_assert!((output - input).abs() <= 1e-9 * input.max(1.0));
        for o in &outs {
            prop_assert!(o.composition.iter().all(|g| *g >= 0.0));
            prop_assert!((o.composition.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        let scaled: Vec<f64> = totals.iter().map(|t| t * factor).collect();
        for (a, b) in scatter(&scaled, &splits, &outs_dests).iter().zip(&outs) {
            prop_assert!((a.flow - factor * b.flow).abs() <= 1e-9 * (factor * b.flow).max(1.0));
        }
    }

    #[test]
    fn permit_stays_in_unit_interval(density in -10.0..100.0f64, cr in 5.0..40.0f64, gap in 1.0..100.0f64) {
        let p = permit(&DownstreamView { density, critical_density: cr, jam_density: cr + gap });
        prop_assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn restarting_from_a_checkpoint_reproduces_the_run() {
    let spec = metanet_core::builtin("paper-fig3").unwrap();
    for kind in [ModelKind::MetanetS, ModelKind::CtmS] {
        let m = model(&spec, kind);
        let mut state = m.initial_state();
        for _ in 0..20_000 {
            m.step(&mut state).unwrap();
        }
        let mut resumed = state.clone();
        for _ in 0..15_000 {
            let a = m.step(&mut state).unwrap();
            let b = m.step(&mut resumed).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(state, resumed, "{kind}");
    }
}

#[test]
fn empty_network_without_demand_stays_empty() {
    let mut spec = common::single_link(2, 0.0, 1e-3, 500);
    spec.freeway[0].initial = Some(SectionInit { density: Some(vec![0.0, 0.0]), ..Default::default() });
    for kind in [ModelKind::MetanetS, ModelKind::CtmS] {
        let m = model(&spec, kind);
        let initial = m.initial_state();
        let mut state = initial.clone();
        for _ in 0..spec.horizon {
            m.step(&mut state).unwrap();
        }
        assert_eq!(state.freeway, initial.freeway, "{kind}");
        assert_eq!(state.queues, initial.queues);
    }
}

#[test]
fn ctm_outflow_is_monotone_in_demand() {
    let exited = |flow: f64| {
        let mut spec = common::single_link(4, flow, 1e-3, 3000);
        spec.queue[0].max_flow = 4000.0;
        run_spec(&spec, ModelKind::CtmS, &mut [], &RunOptions::default()).unwrap().exited_veh
    };
    let mut last = 0.0;
    for flow in [500.0, 1500.0, 3000.0, 3990.0, 5000.0, 8000.0] {
        let out = exited(flow);
        assert!(out >= last - 1e-9, "demand {flow}: {out} < {last}");
        last = out;
    }
}
