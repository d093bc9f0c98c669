use llm_pso_core::prompt::ParticleRecord;
use llm_pso_core::{build_prompt, SearchSpace, SwarmSnapshot};

const FRAGMENT: &str = "80, 3, 1.6, 1.2, 0.1342, 120, 4, 1.8, 1.5, 0.1030, 95, 2, 1.6, 1, 0.0012";

fn record(neurons: f64, layers: f64, vn: f64, vl: f64, cost: f64) -> ParticleRecord {
    ParticleRecord {
        position: vec![neurons, layers],
        velocity: vec![vn, vl],
        cost,
    }
}

fn snapshot() -> SwarmSnapshot {
    SwarmSnapshot::new(
        SearchSpace::neurons_layers(),
        vec![
            record(80.0, 3.0, 1.6, 1.2, 0.1342),
            record(120.0, 4.0, 1.8, 1.5, 0.1030),
            record(95.0, 2.0, 1.6, 1.0, 0.0012),
            record(150.0, 5.0, -2.4, 0.3, 0.1421),
            record(60.0, 2.0, 0.75, -1.0, 0.2210),
        ],
    )
    .unwrap()
}

#[test]
fn fragment_appears_verbatim() {
    let prompt = build_prompt(&snapshot()).unwrap();
    assert!(prompt.contains(FRAGMENT), "{prompt}");
}

#[test]
fn full_template_byte_exact() {
    let mut expected = String::new();
    expected.push_str("Below is the string showing the best number of neurons as the first entry and best number of layers as the second entry of the DL model for 5 particles with their corresponding cost as the fifth entry, while dynamically updating the number of neurons and layers to reduce the cost for the same model using Particle Swarm Optimization. The third and the fourth entries are the neurons velocities and layers velocities, respectively. The first entry (Neurons) of the string ranges from 2 to 200, while the second entry (Layers) of the string ranges from 2 to 5.");
    expected.push_str("\n\n");
    expected.push_str(FRAGMENT);
    expected.push_str(", 150, 5, -2.4, 0.3, 0.1421, 60, 2, 0.75, -1, 0.2210");
    expected.push_str("\n\n");
    expected.push_str("Give me exactly 5 more number of neurons and layers for the same model in order to reduce the cost further. Your response must be exactly in the same format as input and must contain only values. Your response must not contain the cost values.");
    assert_eq!(build_prompt(&snapshot()).unwrap(), expected);
}
