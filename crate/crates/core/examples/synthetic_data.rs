//! Generate a synthetic dataset from a preset, save it as CSV and load it
//! back, then standardize features on a training split.
//!
//! cargo run --example synthetic_data -- [preset]

use cpcp::data::{
    generate_synthetic, load_csv, split_622, write_csv, Standardizer, SyntheticSpec, PRESET_NAMES,
};
use cpcp::numeric::RngStream;

fn main() -> cpcp::Result<()> {
    let preset = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "heteroscedastic".into());
    let spec = SyntheticSpec::preset(&preset)?;
    let data = generate_synthetic(&spec, 1000, &mut RngStream::new(1, 0))?;
    let oracle = data.oracle.unwrap();
    println!("preset {preset} (available: {})", PRESET_NAMES.join(", "));
    println!(
        "{} rows, {} features, {} labels",
        data.len(),
        data.feature_dim(),
        data.label_dim()
    );
    let x = data.x.row(0);
    println!(
        "row 0: location {:.3}, scale {:.3}, 0.9-quantile {:.3}, density at it {:.3}",
        oracle.location(x),
        oracle.scale(x),
        oracle.true_quantile(x, 0.9),
        oracle.true_density_weight(x, 0.9)
    );

    let dir = std::env::temp_dir().join("cpcp-synthetic-example");
    std::fs::create_dir_all(&dir).map_err(|e| cpcp::Error::Config(e.to_string()))?;
    let path = dir.join(format!("{preset}.csv"));
    let features: Vec<String> = (0..spec.feature_dim).map(|j| format!("x{j}")).collect();
    let labels: Vec<String> = (0..spec.label_dim).map(|j| format!("y{j}")).collect();
    write_csv(&path, &data, &features, &labels)?;
    let back = load_csv(&path, &features, &labels)?;
    assert_eq!(back.x, data.x);
    println!("round-tripped through {}", path.display());

    let parts = split_622(back.len(), &mut RngStream::new(1, 1))?;
    let train = back.select(&parts.train);
    let st = Standardizer::fit(&train.x)?;
    println!("train feature means {:.3?}", st.mean);
    println!("train feature stds  {:.3?}", st.std);
    Ok(())
}
