//! Simulated oracles on the two-factor synthetic set: sample triplets for two
//! conflicting queries, flip a fraction of answers, and write the corpus.

use opbn::data::{gen_twofactor_synthetic, TwoFactorParams};
use opbn::oracle::{is_consistent, sample_triplets, write_triplets, Attribute, OracleConfig, Query, QueryKind};
use opbn::rng::{stream, Purpose};

fn main() -> anyhow::Result<()> {
    let data = gen_twofactor_synthetic(500, TwoFactorParams::default(), &mut stream(0, Purpose::Data, 0))?;
    let queries = vec![
        Query::new(QueryKind::Identity),
        Query::new(QueryKind::Scalar(Attribute::Azimuth)),
    ];

    for noise in [0.0, 0.2, 0.4] {
        let cfg = OracleConfig {
            noise,
            ..OracleConfig::new(7)
        };
        let triplets = sample_triplets(&data.meta, &queries, 1000, &cfg)?;
        let mut agree = 0;
        for t in &triplets {
            if is_consistent(&data.meta, &queries, t)? {
                agree += 1;
            }
        }
        println!(
            "noise {noise:.1}: {} triplets, {agree} agree with a noise-free oracle",
            triplets.len()
        );
    }

    let triplets = sample_triplets(&data.meta, &queries, 5, &OracleConfig::new(7))?;
    for t in &triplets {
        let (i, j, l) = (&data.meta[t.i], &data.meta[t.j], &data.meta[t.l]);
        println!(
            "{:<9} ({}, {}, {}): labels {:?} {:?} {:?}, azimuth {:.0} {:.0} {:.0}",
            queries[t.query].name,
            t.i,
            t.j,
            t.l,
            i.label.unwrap(),
            j.label.unwrap(),
            l.label.unwrap(),
            i.azimuth.unwrap(),
            j.azimuth.unwrap(),
            l.azimuth.unwrap()
        );
    }

    let path = std::env::temp_dir().join("opbn-oracle-triplets.csv");
    write_triplets(&path, &queries, &triplets)?;
    println!("wrote {}", path.display());
    Ok(())
}
