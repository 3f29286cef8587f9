use proptest::prelude::*;

use frustlab::datagen::{generate_synthetic_dataset, SyntheticConfig};
use frustlab::ingest::{
    load_embedding_file, parse_embeddings, write_embedding_file, write_embeddings,
};
use frustlab::{Dataset, Error, Matrix};

fn close(a: &Matrix, b: &Matrix) -> bool {
    a.shape() == b.shape()
        && a.as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

#[test]
fn synthetic_dataset_survives_a_file_round_trip() {
    let data = generate_synthetic_dataset(&SyntheticConfig {
        n: 200,
        k: 8,
        k_known: 3,
        r: 6,
        seed: 4,
        ..Default::default()
    })
    .unwrap()
    .dataset;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    write_embedding_file(&data, &path).unwrap();
    let back = load_embedding_file(&path).unwrap();
    assert_eq!(back.labels, data.labels);
    assert!(close(&back.activations, &data.activations));
    assert!(close(&back.concepts, &data.concepts));
    assert_eq!(back.known, (0..8).collect::<Vec<_>>());

    // Writing what was read reproduces the file byte for byte.
    let again = dir.path().join("again.csv");
    write_embedding_file(&back, &again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn errors_name_the_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.csv");
    std::fs::write(
        &path,
        "frustlab-embeddings,v1,n=2,r=2,k=1\na_0,a_1,c_0,y\n0.1,0.2,0.3,1\n0.1,0.2,1\n",
    )
    .unwrap();
    let err = load_embedding_file(&path).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)), "{err:?}");
    let msg = err.to_string();
    assert!(msg.contains("short.csv:4"), "{msg}");

    let path = dir.path().join("label.csv");
    std::fs::write(
        &path,
        "frustlab-embeddings,v1,n=1,r=1,k=1\na_0,c_0,y\n0.5,0.5,2\n",
    )
    .unwrap();
    assert!(matches!(
        load_embedding_file(&path),
        Err(Error::NonBinaryLabel { line: 3, .. })
    ));
}

proptest! {
    #[test]
    fn arbitrary_values_round_trip(n in 1usize..12, r in 1usize..5, k in 1usize..4, seed in 0u64..1000) {
        let mut rng = frustlab::RngStream::new(seed);
        let a = rng.normal_matrix(n, r, 1e3);
        let c = rng.normal_matrix(n, k, 1e-3);
        let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let data = Dataset::new(a, c, (0..k).collect(), y).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&data, &mut buf).unwrap();
        let back = parse_embeddings(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert!(close(&back.activations, &data.activations));
        prop_assert!(close(&back.concepts, &data.concepts));
        prop_assert_eq!(back.labels, data.labels);
    }
}
