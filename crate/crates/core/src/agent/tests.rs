use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn shape(n_options: usize) -> AgentShape {
    AgentShape {
        observation_dim: 4,
        action_dim: 2,
        n_options,
        hidden: 16,
    }
}

fn agent(n_options: usize, seed: u64) -> OptionAgent {
    OptionAgent::new(shape(n_options), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..4).map(|_| rng.random_range(-2.0..2.0)).collect()
}

const BOUNDS: (&[f64], &[f64]) = (&[-1.0, -1.0], &[1.0, 1.0]);

#[test]
fn rejects_degenerate_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(OptionAgent::new(shape(0), &mut rng).is_err());
}

#[test]
fn fresh_option_distribution_is_near_uniform() {
    let agent = agent(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let mu = agent.option_distribution(&random_state(&mut rng)).unwrap();
        assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for p in mu {
            assert!((0.3..=0.7).contains(&p), "{p}");
        }
    }
}

#[test]
fn equal_logits_give_uniform_options() {
    let mut agent = agent(3, 1);
    let ids = *agent.actor_params();
    let actor = agent.actor_mut();
    actor.value_mut(ids.option_w).data_mut().fill(0.0);
    actor.value_mut(ids.option_b).data_mut().fill(0.7);
    let mu = agent.option_distribution(&[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert_eq!(mu, vec![1.0 / 3.0; 3]);
}

#[test]
fn tiny_std_samples_the_mean() {
    let mut agent = agent(2, 3);
    let ids = *agent.actor_params();
    agent
        .actor_mut()
        .value_mut(ids.log_std)
        .data_mut()
        .fill(1e-8f64.ln());
    let state = [0.5, -0.5, 0.2, 0.0];
    let outputs = agent.actor_outputs(&state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sample = agent.sample_action(&state, 1, BOUNDS, &mut rng).unwrap();
    for (a, m) in sample.raw.iter().zip(outputs.mean(1)) {
        assert!((a - m).abs() < 1e-6);
    }
}

#[test]
fn sample_mean_matches_policy_mean() {
    // Monte-Carlo oracle: the empirical mean of N draws lies within 3σ/√N.
    let mut agent = agent(2, 5);
    let ids = *agent.actor_params();
    agent
        .actor_mut()
        .value_mut(ids.log_std)
        .data_mut()
        .copy_from_slice(&[-0.5, 0.3, 0.0, 0.2]);
    let state = [0.3, 0.1, -0.4, 0.9];
    let outputs = agent.actor_outputs(&state).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    for option in 0..2 {
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let s = outputs.sample(option, BOUNDS, &mut rng);
            sums[0] += s.raw[0];
            sums[1] += s.raw[1];
        }
        for d in 0..2 {
            let sigma = outputs.log_std(option)[d].exp();
            let err = (sums[d] / n as f64 - outputs.mean(option)[d]).abs();
            assert!(
                err < 3.0 * sigma / (n as f64).sqrt(),
                "option {option} dim {d}"
            );
        }
    }
}

#[test]
fn stored_log_prob_is_reproducible_and_clamping_is_separate() {
    let agent = agent(2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let state = random_state(&mut rng);
        let option = rng.random_range(0..2);
        let sample = agent
            .sample_action(&state, option, BOUNDS, &mut rng)
            .unwrap();
        let again = agent.action_log_prob(&state, option, &sample.raw).unwrap();
        assert_eq!(again, sample.log_prob);
        for (c, r) in sample.clamped.iter().zip(&sample.raw) {
            assert_eq!(*c, r.clamp(-1.0, 1.0));
        }
    }
}

#[test]
fn option_index_is_checked() {
    let agent = agent(2, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(agent.sample_action(&[0.0; 4], 2, BOUNDS, &mut rng).is_err());
    assert!(agent.termination_prob(&[0.0; 4], 5).is_err());
    assert!(matches!(
        agent.q_values(&[0.0; 3]),
        Err(AgentError::StateDim {
            expected: 4,
            got: 3
        })
    ));
}

#[test]
fn termination_is_sigmoid_of_head() {
    let mut agent = agent(2, 9);
    let ids = *agent.critic_params();
    let critic = agent.critic_mut();
    critic.value_mut(ids.termination_w).data_mut().fill(0.0);
    critic.value_mut(ids.termination_b).data_mut().fill(0.0);
    assert_eq!(
        agent.termination_prob(&[1.0, 2.0, 3.0, 4.0], 1).unwrap(),
        0.5
    );

    let mut last = 0.0;
    for logit in [-5.0, -1.0, 0.0, 2.0, 30.0] {
        agent.critic_mut().value_mut(ids.termination_b).data_mut()[0] = logit;
        let beta = agent.termination_prob(&[1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert!(beta > last && beta < 1.0 || logit == 30.0 && beta <= 1.0);
        last = beta;
    }
}

#[test]
fn terminations_strictly_inside_unit_interval() {
    let agent = agent(3, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let out = agent.critic_outputs(&random_state(&mut rng)).unwrap();
        assert!(out.termination.iter().all(|&b| b > 0.0 && b < 1.0));
    }
}

#[test]
fn v_is_option_weighted_q() {
    assert_eq!(expected_value(&[0.5, 0.5], &[1.0, 3.0]), 2.0);
    let single = agent(1, 12);
    let state = [0.2, 0.4, 0.6, 0.8];
    assert_eq!(
        single.v_value(&state).unwrap(),
        single.q_values(&state).unwrap()[0]
    );
    // Σ_o μ(o) (Q(o) − V) = 0
    let agent = agent(3, 13);
    let mu = agent.option_distribution(&state).unwrap();
    let q = agent.q_values(&state).unwrap();
    let v = agent.v_value(&state).unwrap();
    let weighted: f64 = mu.iter().zip(&q).map(|(m, q)| m * (q - v)).sum();
    assert!(weighted.abs() < 1e-12);
}

#[test]
fn termination_gradient_matches_finite_differences() {
    let agent = agent(2, 14);
    let state = Tensor::matrix(1, 4, vec![0.3, -0.2, 0.5, 0.1]).unwrap();
    let beta = |a: &OptionAgent| {
        let mut tape = Tape::new();
        let s = tape.constant(state.clone());
        let heads = a.critic_forward(&mut tape, s).unwrap();
        let picked = tape.pick_columns(heads.termination, &[1]).unwrap();
        let loss = tape.sum(picked);
        (tape, loss)
    };
    let mut analytic = agent.clone();
    let (tape, loss) = beta(&analytic);
    tape.backward(loss, &mut analytic.parameter_sets_mut())
        .unwrap();

    let mut probe = agent.clone();
    let h = 1e-5;
    for id in agent.critic().ids() {
        for k in 0..agent.critic().value(id).len() {
            let original = agent.critic().value(id).data()[k];
            probe.critic_mut().value_mut(id).data_mut()[k] = original + h;
            let (t, l) = beta(&probe);
            let up = t.value(l).data()[0];
            probe.critic_mut().value_mut(id).data_mut()[k] = original - h;
            let (t, l) = beta(&probe);
            let down = t.value(l).data()[0];
            probe.critic_mut().value_mut(id).data_mut()[k] = original;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.critic().grad(id).data()[k];
            let diff = (a - numeric).abs();
            assert!(diff < 1e-6 || diff / a.abs().max(numeric.abs()) < 1e-4);
        }
    }
    // The termination head never touches the actor.
    for id in analytic.actor().ids() {
        assert!(analytic.actor().grad(id).data().iter().all(|&g| g == 0.0));
    }
}

#[test]
fn categorical_sampling_follows_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let probs = [0.2, 0.5, 0.3];
    let mut counts = [0usize; 3];
    for _ in 0..30_000 {
        counts[sample_categorical(&probs, &mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        assert!((*c as f64 / 30_000.0 - p).abs() < 0.015);
    }
    assert_eq!(sample_categorical(&[1.0], &mut rng), 0);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let original = agent(2, 16);
    let mut buffer = Vec::new();
    original.save("icecorridor", &mut buffer).unwrap();
    let (env, restored) = OptionAgent::load(buffer.as_slice()).unwrap();
    assert_eq!(env, "icecorridor");
    assert_eq!(restored.shape(), original.shape());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let state = random_state(&mut rng);
        assert_eq!(
            original.actor_outputs(&state).unwrap(),
            restored.actor_outputs(&state).unwrap()
        );
        assert_eq!(
            original.critic_outputs(&state).unwrap(),
            restored.critic_outputs(&state).unwrap()
        );
    }
}

#[test]
fn checkpoint_errors_name_the_line() {
    let original = agent(1, 18);
    let mut buffer = Vec::new();
    original.save("pointmass1d", &mut buffer).unwrap();
    let text = String::from_utf8(buffer).unwrap();

    let truncated: String = text.lines().take(9).collect::<Vec<_>>().join("\n");
    assert!(OptionAgent::load(truncated.as_bytes()).is_err());

    let corrupted = text.replacen("param actor.b1 16", "param actor.b1 17", 1);
    match OptionAgent::load(corrupted.as_bytes()) {
        Err(AgentError::Checkpoint { line, message }) => {
            assert_eq!(line, 9);
            assert!(message.contains("actor.b1"), "{message}");
        }
        other => panic!("expected checkpoint error, got {other:?}"),
    }

    assert!(OptionAgent::load("not a checkpoint\n".as_bytes()).is_err());
}
