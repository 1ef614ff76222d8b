//! Nested Latin hypercube over the five scenario inputs.
//!
//! cargo run --example nested_design

use segsur::doe::{design_rows, generate_nested_lhs, maximin, stratification_violation, DesignSpec};

fn main() {
    let spec = DesignSpec::default();
    let design = generate_nested_lhs(&spec).expect("valid spec");

    for (tier, (&size, q)) in spec.sizes.iter().zip(&design.quality).enumerate() {
        let prefix = &design.unit[..size];
        println!(
            "tier {tier}: first {size} points, ESE maximin {:.4} -> {:.4}, prefix maximin {:.4}, stratified: {}",
            q.initial_maximin,
            q.final_maximin,
            maximin(prefix),
            stratification_violation(&design, size).is_none()
        );
    }

    println!("\nfirst rows of design.csv:");
    println!("index tier num_types density intolerance map_side perception");
    for r in design_rows(&design).unwrap().iter().take(8) {
        println!(
            "{:5} {:4} {:9} {:7.3} {:11.3} {:8} {:10}",
            r.index, r.tier, r.num_types, r.density, r.intolerance, r.map_side, r.perception
        );
    }
}
