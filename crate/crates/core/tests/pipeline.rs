//! Generate, store, tokenize, pack and benchmark in-process.

use std::fs;
use std::path::Path;

use deskcap::codec::{write_media, GopConfig};
use deskcap::container::{write_session, ContainerReader, MediaPolicy, WriteOptions};
use deskcap::decode_engine::{bench_pipeline, BenchConfig, Strategy};
use deskcap::events::{filter_inactive, resample_stream, Topic};
use deskcap::fsl::{pack_dataset, read_manifest, read_sample_tokens, write_dataset, PackConfig};
use deskcap::metrics::evaluate;
use deskcap::synth::{generate, SynthConfig};
use deskcap::tokenizer::{read_token_file, write_token_file, TokenizerConfig};

fn gen_session(dir: &Path, seed: u64, secs: f64) -> deskcap::events::Episode {
    let cfg = SynthConfig {
        seed,
        duration_s: secs,
        ..SynthConfig::default()
    };
    let name = format!("s{seed}.gops");
    let s = generate(&cfg, &name);
    write_media(dir.join(&name), &s.frames, &GopConfig::fixed(30), 20.0).unwrap();
    let policy = MediaPolicy::External {
        media_root: dir.to_path_buf(),
    };
    write_session(dir.join(format!("s{seed}.owa")), &s.episode, &policy, &WriteOptions::default()).unwrap();
    s.episode
}

#[test]
fn generation_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen_session(a.path(), 42, 10.0);
    gen_session(b.path(), 42, 10.0);
    for f in ["s42.owa", "s42.gops"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stages_compose() {
    let dir = tempfile::tempdir().unwrap();
    let episodes: Vec<_> = (1..=3).map(|seed| gen_session(dir.path(), seed, 30.0)).collect();
    let tok = TokenizerConfig::default();

    let mut converted = Vec::new();
    for (seed, ep) in (1..=3).zip(&episodes) {
        let stored = ContainerReader::open_path(dir.path().join(format!("s{seed}.owa")))
            .unwrap()
            .read_episode()
            .unwrap();
        assert_eq!(&stored, ep);
        assert_eq!(stored.count(Topic::Screen), 600);
        let c = filter_inactive(&resample_stream(&stored, 50), 10.0);
        let text = write_token_file(&c, &tok).unwrap();
        let back = read_token_file(&text, &tok).unwrap();
        let report = evaluate(&c, &back, 50);
        assert_eq!(report.pearson_x.value, 1.0);
        assert_eq!(report.kbd.percent, 100.0);
        converted.push(back);
    }

    let ds = pack_dataset(&converted, &PackConfig::default()).unwrap();
    let out = dir.path().join("ds");
    fs::create_dir_all(&out).unwrap();
    write_dataset(&out, &ds, dir.path().to_str().unwrap()).unwrap();
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.total_frames(), 1800);
    for (k, s) in ds.samples.iter().enumerate() {
        assert_eq!(read_sample_tokens(&out, &manifest, k).unwrap(), s.tokens);
    }
    let mut order: Vec<&str> = ds.samples.iter().map(|s| s.episode_id.as_str()).collect();
    order.dedup();
    assert_eq!(order, ["synth-1", "synth-2", "synth-3"]);

    let work = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        reps: 2,
        ..BenchConfig::default()
    };
    let report = bench_pipeline(&out, &cfg, work.path()).unwrap();
    assert_eq!(report.rows.len(), 6);
    for gop in &cfg.gops {
        let per = report.row(gop, Strategy::PerFrame).unwrap().stats;
        let naive = report.row(gop, Strategy::NaiveBatch).unwrap().stats;
        let adaptive = report.row(gop, Strategy::AdaptiveBatch).unwrap().stats;
        assert_eq!(per.images, 1800);
        assert!(adaptive.frames_decoded <= per.frames_decoded);
        assert!(adaptive.frames_decoded <= naive.frames_decoded);
        assert!(adaptive.kb_per_img() <= per.kb_per_img());
    }
    let again = bench_pipeline(&out, &cfg, tempfile::tempdir().unwrap().path()).unwrap();
    let strip = |r: &str| {
        r.lines()
            .map(|l| l.split(' ').filter(|f| !f.starts_with("timing.")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&report.records()), strip(&again.records()));
}
