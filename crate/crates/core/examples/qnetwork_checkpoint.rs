//! Builds a dueling Q-network, runs a forward pass and round-trips it through
//! a checkpoint file.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_wncs::env::Observation;
use safe_wncs::nn::{self, Activation, Head, QNetwork};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let nodes = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = QNetwork::new(
        Observation::dimension(nodes),
        &[32, 64],
        20,
        Head::Dueling,
        Activation::LeakyRelu,
        &mut rng,
    );
    println!("{} parameters", net.parameter_count());
    let x = vec![0.1; net.input_size()];
    let q = net.forward(&x)?;
    println!("q = {:.4?}", &q[..5]);

    let path = std::env::temp_dir().join("example.qnet");
    nn::save(&net, &path)?;
    let back = nn::load(&path)?;
    println!("reloaded, parameter distance {}", net.distance(&back));
    std::fs::remove_file(&path)?;
    Ok(())
}
