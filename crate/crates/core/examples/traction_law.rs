//! Walks the cohesive law through loading, unloading and reloading, and
//! compares the dissipated energy with the fracture energy.

use crackpath::material::{envelope_dissipation, tangent, traction, CohesiveLaw, CrackHistory};
use nalgebra::Vector2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let law = CohesiveLaw::new(3.0, 0.1)?;
    let z0 = law.threshold_opening();
    println!(
        "f_t {} MPa, G_f {} N/mm, G_f0 {:.1e} N/mm, zeta_0 {:.4e} mm",
        law.tensile_strength(),
        law.fracture_energy(),
        law.threshold_energy(),
        z0
    );

    // Load to 20 zeta_0 along the normal, unload to half, reload past the peak.
    let path = [0.5, 1.0, 5.0, 20.0, 10.0, 0.0, 10.0, 20.0, 40.0];
    let mut history: Option<CrackHistory> = None;
    println!("{:>10} {:>12} {:>12} {:>10}  regime", "zeta/z0", "T_n", "D_nn", "W_d/G_f");
    for k in path {
        let zeta = Vector2::new(k * z0, 0.0);
        let t = traction(zeta, &law, history.as_ref());
        let d = tangent(zeta, &law, history.as_ref());
        history = CrackHistory::committed(&law, history, zeta);
        let spent = history.map_or(0.0, |h| envelope_dissipation(&law, h.zeta_max));
        println!(
            "{:>10.1} {:>12.5} {:>12.4e} {:>10.5}  {:?}",
            k,
            t.traction[0],
            d[(0, 0)],
            spent / law.fracture_energy(),
            t.regime
        );
    }

    // A mixed-mode opening carries the traction along the opening direction.
    let zeta = Vector2::new(3.0, 4.0) * z0;
    let t = traction(zeta, &law, None);
    println!("mixed opening {:?}: traction {:?}", zeta.as_slice(), t.traction.as_slice());
    Ok(())
}
