//! Acceptance checks. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simulst::bleu::{corpus_bleu, BleuTokenizer};
use simulst::cli::{
    run_sweep, write_log, write_sweep_csv, EvalSettings, LogEntry, Manifest, ManifestEntry,
    ScoredInstance, SweepAxis, SweepSpec,
};
use simulst::harness::ComputeClock;
use simulst::latency::{atd, average_lagging, laal};
use simulst::model::{
    offline_decode, serve_connection, DiagonalConfig, DiagonalToyModel, Frame, IncrementalModel,
    ModelSpec, RemoteModel, Script, ScriptEntry, ScriptedModel, ServerSession, EOS_ID, EOS_SURFACE,
};
use simulst::policy::normalize_framewise;
use simulst::{
    align, run_session, AttentionMatrix, InstanceRecord, LayerSpec, PolicyConfig,
    SessionInput, SessionOptions, Token,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Session records gathered by every check, for the stream invariants.
#[derive(Default)]
struct Collected {
    records: Vec<InstanceRecord>,
}

fn symbol_input(index: usize, symbols: &[String], frame_ms: f64) -> SessionInput {
    SessionInput {
        index,
        id: format!("utt{index}"),
        frames: symbols.iter().map(|s| Frame::Symbol(s.clone())).collect(),
        duration_ms: symbols.len() as f64 * frame_ms,
        reference: symbols.join(" "),
    }
}

fn random_diagonal(rng: &mut ChaCha8Rng) -> DiagonalConfig {
    let vocab: BTreeMap<String, String> = (0..6)
        .map(|i| (format!("s{i}"), format!("t{}", rng.gen_range(0..10))))
        .collect();
    DiagonalConfig {
        vocab,
        spread: if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.2..3.0) },
        len_ratio: rng.gen_range(0.3..2.5),
        n_layers: rng.gen_range(1..=4),
        frame_ms: 80.0,
        separator: " ".into(),
    }
}

fn random_symbols(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("s{}", rng.gen_range(0..8))).collect()
}

fn offline_equivalence(out: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let started = Instant::now();
    for case in 0..100 {
        let cfg = random_diagonal(&mut rng);
        let n = rng.gen_range(1..=40);
        let symbols = random_symbols(&mut rng, n);
        let input = symbol_input(case, &symbols, cfg.frame_ms);
        let layer = if rng.gen_bool(0.2) {
            LayerSpec::Average
        } else {
            LayerSpec::Index(rng.gen_range(1..=cfg.n_layers))
        };
        let config = PolicyConfig::new(rng.gen_range(1..=8), layer, input.duration_ms as u32)
            .map_err(|e| e.to_string())?
            .with_normalize(rng.gen_bool(0.5));
        let mut model = DiagonalToyModel::new(cfg.clone()).map_err(|e| e.to_string())?;
        let session = run_session(&mut model, &input, &config, &SessionOptions::default())
            .map_err(|e| format!("case {case}: {e}"))?;
        let offline = offline_decode(&mut model, &input.frames, config.target_cap(n))
            .map_err(|e| e.to_string())?;
        ensure(session.tokens == offline, || {
            format!("case {case}: streaming {:?} != offline {:?}", session.tokens, offline)
        })?;
        out.records.push(session.record);
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 models identical in {secs:.3} s"))
}

fn closed_form(out: &mut Collected) -> Outcome {
    let n = 60;
    let symbols: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let input = symbol_input(0, &symbols, 80.0);
    let config = PolicyConfig::new(1, LayerSpec::Index(1), 80).map_err(|e| e.to_string())?;
    let mut model = DiagonalToyModel::new(DiagonalConfig::default()).map_err(|e| e.to_string())?;
    let result = run_session(&mut model, &input, &config, &SessionOptions::default())
        .map_err(|e| e.to_string())?;
    let emitted_at: Vec<usize> = result
        .decisions
        .iter()
        .filter(|d| d.decision == simulst::Decision::Emit && !d.is_eos)
        .map(|d| d.frames_received)
        .collect();
    for i in 0..50 {
        ensure(emitted_at.get(i) == Some(&(i + 2)), || {
            format!("token {i} emitted at {:?}, expected {}", emitted_at.get(i), i + 2)
        })?;
    }
    out.records.push(result.record);
    Ok("token i emitted at frames_received = i + 2 for i < 50".into())
}

fn f_monotonicity() -> Outcome {
    let n = 30;
    let chunk = 80u32;
    let entries = (0..3)
        .map(|k| {
            let symbols: Vec<String> = (0..n + 5 * k).map(|i| format!("s{i}")).collect();
            ManifestEntry {
                id: format!("utt{k}"),
                duration_ms: symbols.len() as f64 * 80.0,
                reference: symbols.join(" "),
                symbols: Some(symbols),
                source_frames_file: None,
                n_frames: None,
            }
        })
        .collect();
    let manifest = Manifest::new(entries).map_err(|e| e.to_string())?;
    let mut settings = EvalSettings::new(
        PolicyConfig::new(1, LayerSpec::Index(1), chunk).map_err(|e| e.to_string())?,
    );
    settings.options.clock = ComputeClock::PerStep(0.0);
    let spec = SweepSpec::parse(SweepAxis::F, "1..6")?;
    let rows = run_sweep(&manifest, &ModelSpec::Diagonal(DiagonalConfig::default()), &settings, &spec)
        .map_err(|e| e.to_string())?;
    let mut csv_bytes = Vec::new();
    write_sweep_csv(SweepAxis::F, &rows, &mut csv_bytes).map_err(|e| e.to_string())?;

    let mut reader = csv::Reader::from_reader(csv_bytes.as_slice());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no column {name}"));
    let (c_f, c_status, c_al, c_mean) = (col("f")?, col("status")?, col("al_ms")?, col("mean_delay_ms")?);
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut als = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |c: usize| rec[c].parse::<f64>().map_err(|e| format!("{}: {e}", &rec[c]));
        ensure(&rec[c_status] == "ok", || format!("f={} failed", &rec[c_f]))?;
        let (f, al, mean) = (parse(c_f)?, parse(c_al)?, parse(c_mean)?);
        ensure(al >= prev.0 && mean >= prev.1, || format!("decrease at f={f}"))?;
        ensure((al - (f + 1.0) * chunk as f64).abs() < 1e-9, || {
            format!("AL {al} at f={f}, expected {}", (f + 1.0) * chunk as f64)
        })?;
        prev = (al, mean);
        als.push(al);
    }
    ensure(als.len() == 6, || format!("{} rows", als.len()))?;
    Ok(format!("AL over f=1..6: {als:?}"))
}

fn metric_oracles() -> Outcome {
    let checks = [
        ("AL", average_lagging(&[500.0, 1000.0, 1500.0], 1500.0, 3), 500.0),
        ("LAAL", laal(&[500.0, 1000.0, 1500.0, 1500.0], 1500.0, 3), 625.0),
        ("ATD", atd(&[1000.0, 1000.0], 1000.0, 2, 500.0), 250.0),
    ];
    for (name, got, want) in checks {
        let got = got.map_err(|e| format!("{name}: {e}"))?;
        ensure((got - want).abs() <= 1e-9, || format!("{name} = {got}, expected {want}"))?;
    }
    Ok("AL 500, LAAL 625, ATD 250".into())
}

fn ordering_invariants(out: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..1000 {
        let t = rng.gen_range(100.0..5000.0);
        let len = rng.gen_range(1..30);
        let mut d: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..t)).collect();
        d.sort_by(f64::total_cmp);
        let ref_len = rng.gen_range(1..30);
        let al = average_lagging(&d, t, ref_len).map_err(|e| e.to_string())?;
        let la = laal(&d, t, ref_len).map_err(|e| e.to_string())?;
        ensure(la >= al - 1e-9, || format!("case {case}: LAAL {la} < AL {al}"))?;
    }

    // streaming sessions on measured and fixed clocks
    for case in 0..100 {
        let cfg = random_diagonal(&mut rng);
        let n = rng.gen_range(1..=30);
        let input = symbol_input(case, &random_symbols(&mut rng, n), cfg.frame_ms);
        let config = PolicyConfig::new(rng.gen_range(1..=4), LayerSpec::Average, 80 * rng.gen_range(1..=4))
            .map_err(|e| e.to_string())?
            .with_normalize(rng.gen_bool(0.5));
        let options = SessionOptions {
            clock: if case % 2 == 0 {
                ComputeClock::Wall
            } else {
                ComputeClock::PerStep(rng.gen_range(0.0..20.0))
            },
            ..SessionOptions::default()
        };
        let mut model = DiagonalToyModel::new(cfg).map_err(|e| e.to_string())?;
        let r = run_session(&mut model, &input, &config, &options).map_err(|e| e.to_string())?;
        out.records.push(r.record);
    }

    for r in &out.records {
        let (d, ca) = (r.delays_ms(), r.ca_delays_ms());
        ensure(d.iter().zip(ca).all(|(a, c)| c >= a), || format!("{}: CA below non-CA", r.id()))?;
        ensure(d.windows(2).all(|w| w[0] <= w[1]), || format!("{}: delays decrease", r.id()))?;
        ensure(ca.windows(2).all(|w| w[0] <= w[1]), || format!("{}: CA delays decrease", r.id()))?;
    }
    Ok(format!("1000 fuzzed sequences, {} sessions", out.records.len()))
}

fn bleu_checks() -> Outcome {
    let same = ["the cat sat on the mat", "a quick brown fox"];
    let s = corpus_bleu(&same, &same, BleuTokenizer::Thirteen).map_err(|e| e.to_string())?;
    ensure(s.score == 100.0, || format!("identical corpus scored {}", s.score))?;

    let hyps = ["the cat sat on the mat today", "a quick brown fox jumps over the dog"];
    let refs = ["the cat sat on a mat today", "the quick brown fox jumped over the lazy dog"];
    let pinned = 31.62129983775156;
    let s = corpus_bleu(&hyps, &refs, BleuTokenizer::Thirteen).map_err(|e| e.to_string())?;
    ensure((s.score - pinned).abs() <= 0.01, || format!("pinned corpus scored {}", s.score))?;
    Ok(format!("identical 100.0, pinned {:.4} vs {pinned:.4}", s.score))
}

fn normalization_regression() -> Outcome {
    let m = AttentionMatrix::from_rows(vec![vec![0.1, 0.9], vec![0.2, 0.8]]).map_err(|e| e.to_string())?;
    let before = align(m.row(0, 1)).map_err(|e| e.to_string())?.frame_index;
    let normalized = normalize_framewise(&m);
    let after = align(normalized.row(0, 1)).map_err(|e| e.to_string())?.frame_index;
    ensure((before, after) == (1, 0), || format!("argmax {before} -> {after}"))?;
    Ok("row 1 argmax moves from frame 1 to frame 0".into())
}

fn random_script(rng: &mut ChaCha8Rng, n_frames: usize) -> Script {
    let n_layers = rng.gen_range(1..=4);
    let mut entries = Vec::new();
    for frames in 1..=n_frames {
        for prefix_len in 0..=2 * n_frames + 20 {
            let is_eos = rng.gen_bool(0.08);
            let token = if is_eos {
                Token::new(EOS_ID, EOS_SURFACE)
            } else {
                let id = rng.gen_range(3..40);
                Token::new(id, format!(" t{id}"))
            };
            let attention = (0..n_layers)
                .map(|_| (0..frames).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            entries.push(ScriptEntry {
                frames_received: frames,
                prefix_len,
                token,
                is_eos,
                attention,
            });
        }
    }
    Script::new(n_layers, 80.0, entries).expect("generated script is valid")
}

fn log_bytes(model: &mut dyn IncrementalModel, input: &SessionInput, config: &PolicyConfig) -> Result<Vec<u8>, String> {
    let options = SessionOptions {
        clock: ComputeClock::PerStep(0.0),
        ..SessionOptions::default()
    };
    let scored = run_session(model, input, config, &options)
        .map_err(|e| e.to_string())
        .and_then(|r| {
            ScoredInstance::new(r.record, config.chunk_ms() as f64, r.truncated).map_err(|e| e.to_string())
        });
    let entry = match scored {
        Ok(s) => LogEntry::Scored(s),
        Err(error) => LogEntry::Failed {
            index: input.index,
            id: input.id.clone(),
            error,
        },
    };
    let mut buf = Vec::new();
    write_log(&[entry], &mut buf).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn protocol_transparency(out: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut scored = 0;
    for case in 0..100 {
        let n = rng.gen_range(1..=12);
        let script = Arc::new(random_script(&mut rng, n));
        let input = SessionInput {
            index: case,
            id: format!("utt{case}"),
            frames: vec![Frame::Opaque; n],
            duration_ms: n as f64 * 80.0,
            reference: "t3 t4 t5".into(),
        };
        let layer = if rng.gen_bool(0.25) {
            LayerSpec::Average
        } else {
            LayerSpec::Index(rng.gen_range(1..=script.n_layers()))
        };
        let config = PolicyConfig::new(rng.gen_range(1..=3), layer, 80 * rng.gen_range(1..=3))
            .map_err(|e| e.to_string())?
            .with_normalize(rng.gen_bool(0.5));

        let local = log_bytes(&mut ScriptedModel::new(Arc::clone(&script)), &input, &config)?;

        let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?.to_string();
        let served = Arc::clone(&script);
        let server = thread::spawn(move || {
            let (stream, _) = listener.accept()?;
            serve_connection(ServerSession::new(Box::new(ScriptedModel::new(served))), stream)
        });
        let mut remote = RemoteModel::connect(&addr).map_err(|e| e.to_string())?;
        let wire = log_bytes(&mut remote, &input, &config)?;
        drop(remote);
        server.join().map_err(|_| "server panicked".to_string())?.map_err(|e| e.to_string())?;

        ensure(local == wire, || {
            format!(
                "case {case}:\n  local {}\n  wire  {}",
                String::from_utf8_lossy(&local),
                String::from_utf8_lossy(&wire)
            )
        })?;
        if let Ok(LogEntry::Scored(s)) = simulst::cli::read_log(local.as_slice()).map(|mut v| v.remove(0)) {
            out.records.push(s.record);
            scored += 1;
        }
    }
    Ok(format!("100 scripts bit-identical ({scored} scored, {} failed alike)", 100 - scored))
}

fn presets() -> Outcome {
    let expected = [
        ("en-de", 1000, 6, 4, "word"),
        ("cs-en", 1000, 9, 4, "word"),
        ("en-zh", 800, 1, 4, "char"),
        ("en-ja", 400, 1, 1, "char"),
    ];
    for (pair, chunk, f, layer, seg) in expected {
        let output = Command::new(env!("CARGO_BIN_EXE_simulst"))
            .args(["config", "--preset", pair])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(output.status.success(), || {
            format!("{pair}: {}", String::from_utf8_lossy(&output.stderr))
        })?;
        let v: serde_json::Value = serde_json::from_slice(&output.stdout).map_err(|e| e.to_string())?;
        let want = serde_json::json!({
            "f": f,
            "layer": layer,
            "normalize_framewise": true,
            "chunk_ms": chunk,
            "max_target_units": null,
            "segmentation": seg,
        });
        ensure(v == want, || format!("{pair}: got {v}, expected {want}"))?;
    }
    Ok("en-de, cs-en, en-zh, en-ja".into())
}

fn main() -> ExitCode {
    let mut collected = Collected::default();
    let results: Vec<(&str, Outcome)> = vec![
        ("offline equivalence", offline_equivalence(&mut collected)),
        ("closed-form emission schedule", closed_form(&mut collected)),
        ("f-monotonicity", f_monotonicity()),
        ("metric oracles", metric_oracles()),
        ("protocol transparency", protocol_transparency(&mut collected)),
        ("LAAL >= AL, CA >= non-CA, delay monotonicity", ordering_invariants(&mut collected)),
        ("BLEU", bleu_checks()),
        ("normalization regression", normalization_regression()),
        ("presets", presets()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
