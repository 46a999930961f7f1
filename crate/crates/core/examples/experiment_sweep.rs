//! Reduced end-to-end sweep written to a temporary directory, the same
//! artifacts the `all` stage of the CLI produces.

use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::pipeline::cmd_all;

fn main() -> vbs_beamsim::Result<()> {
    let cfg = ExperimentConfig {
        antennas: vec![[32, 4], [64, 8]],
        s_list: vec![1, 2, 5, 10],
        n_ue: 60,
        seed: 5,
        ..Default::default()
    };
    let out = std::env::temp_dir().join("vbs_beamsim_sweep");
    let table = cmd_all(&cfg, &out)?;
    println!("artifacts in {}", out.display());
    println!("{:>9}  {:>7} {:>7} {:>7} {:>7}", "array", "loc-ba", "vbs-ba", "rckm-ba", "optimal");
    for r in table {
        println!(
            "{:>9}  {:7.2} {:7.2} {:7.2} {:7.2}",
            format!("{}x{}", r.n_bs, r.n_ue),
            r.loc_ba,
            r.vbs_ba,
            r.rckm_ba,
            r.optimal
        );
    }
    Ok(())
}
