//! Compares backpropagated gradients with central finite differences for the
//! default time-reversal and dynamics architectures.
//!
//! ```text
//! cargo run --release --example grad_check
//! ```

use trass::config::Config;
use trass::learn::{dynamics_architecture, gradient_check, trm_architecture, Mlp};
use trass::rng::seeded;

fn main() -> trass::Result<()> {
    let cfg = Config::default();
    let mut rng = seeded(0);
    for (name, sizes) in [
        ("time-reversal", trm_architecture(&cfg.trm, cfg.data.horizon)),
        ("dynamics", dynamics_architecture(&cfg.dynamics)),
    ] {
        let net = Mlp::random(&sizes, &mut rng)?;
        let err = gradient_check(&net, 100, &mut rng)?;
        println!("{name:>13} {sizes:?}: max relative error {err:.2e}");
    }
    Ok(())
}
