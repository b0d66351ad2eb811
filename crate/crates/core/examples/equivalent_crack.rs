//! Equivalent crack geometry of a Q8 and a T6 element for a range of crack
//! normals: chord area `A`, volume `V` and characteristic length `l_c = V/A`.

use crackpath::element::characteristic_length;
use crackpath::fixtures::{single_element, t6_strip};
use crackpath::mesh::parse_mesh;
use nalgebra::Vector2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (q8, _) = parse_mesh(&single_element(50.0).text)?;
    let (t6, _) = parse_mesh(&t6_strip(1, 1, 50.0, 50.0).text)?;
    println!("{:>6} {:>8} {:>10} {:>10} {:>8}", "mesh", "angle", "A", "V", "l_c");
    for (name, mesh) in [("q8", &q8), ("t6", &t6)] {
        for deg in [0.0_f64, 30.0, 45.0, 60.0, 90.0, 135.0] {
            let n = Vector2::new(deg.to_radians().cos(), deg.to_radians().sin());
            let c = characteristic_length(mesh, 0, n)?;
            println!(
                "{:>6} {:>8.0} {:>10.3} {:>10.1} {:>8.3}",
                name, deg, c.area, c.volume, c.length
            );
        }
    }
    Ok(())
}
