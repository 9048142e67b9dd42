mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use common::{stub_oracle_bin, synthetic_bundle};
use natrank::client::{ClientConfig, HttpOracle, Oracle, OracleError, OracleSpec, ProcessOracle};
use natrank::pipeline::{mask_bundle, variants_from_masks, RunConfig};
use natrank::protocol::{ReplyError, Request, Response, WireProposition, VERSION};
use natrank_core::masking::MaskedVariant;
use natrank_core::oracle::{hashed_embedding, PredictionRecord, StubVocab};

fn variants(n: usize) -> Vec<MaskedVariant> {
    let b = synthetic_bundle(11, 0);
    let masks = mask_bundle(&b, &RunConfig::default()).unwrap();
    let mut v = variants_from_masks(&masks).unwrap();
    v.truncate(n);
    assert_eq!(v.len(), n);
    v
}

fn cfg(timeout_ms: u64, retries: usize) -> ClientConfig {
    ClientConfig {
        in_flight: 4,
        timeout: Duration::from_millis(timeout_ms),
        retries,
    }
}

fn run(fault: &str, vs: &[MaskedVariant], c: ClientConfig) -> Result<Vec<PredictionRecord>, OracleError> {
    let cmd = format!("{} {fault}", stub_oracle_bin().display());
    ProcessOracle::new(cmd, c).query(vs, 2, true)
}

#[test]
fn spec_parsing() {
    assert_eq!("stub".parse(), Ok(OracleSpec::Stub));
    assert_eq!("cmd:python m.py".parse(), Ok(OracleSpec::Command("python m.py".into())));
    assert_eq!("http:localhost:8000/p".parse(), Ok(OracleSpec::Http("http://localhost:8000/p".into())));
    assert_eq!("http://h/p".parse(), Ok(OracleSpec::Http("http://h/p".into())));
    assert!("ftp:x".parse::<OracleSpec>().is_err());
    assert!("cmd: ".parse::<OracleSpec>().is_err());
}

#[test]
fn out_of_order_replies_are_matched_by_id() {
    let vs = variants(40);
    let plain = run("", &vs, cfg(5000, 0)).unwrap();
    let jitter = run("--fault jitter", &vs, cfg(5000, 0)).unwrap();
    assert_eq!(plain, jitter);
    for (r, v) in plain.iter().zip(&vs) {
        assert_eq!(r.variant_ref.token_index, v.site.token_index);
        assert_eq!(r.variant_ref.line, v.site.line_no);
        r.validate().unwrap();
    }
}

#[test]
fn crashes_are_retried_with_a_fresh_process() {
    let vs = variants(30);
    let plain = run("", &vs, cfg(5000, 0)).unwrap();
    let crashy = run("--fault crash-after=7", &vs, cfg(5000, 3)).unwrap();
    assert_eq!(plain, crashy);

    match run("--fault crash-after=0", &vs[..3], cfg(5000, 1)) {
        Err(OracleError::GaveUp { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn protocol_violations_fail() {
    let vs = variants(5);
    assert!(matches!(run("--fault stray", &vs, cfg(5000, 0)), Err(OracleError::StrayId(id)) if id.ends_with("-stray")));
    assert!(matches!(
        run("--fault bad-version", &vs, cfg(5000, 0)),
        Err(OracleError::Reply(ReplyError::Version(2)))
    ));
    match run("--fault error", &vs, cfg(5000, 0)) {
        Err(OracleError::Reply(ReplyError::Oracle { msg, .. })) => assert_eq!(msg, "injected failure"),
        other => panic!("{other:?}"),
    }
    match run("--fault malformed", &vs, cfg(5000, 0)) {
        Err(OracleError::Reply(ReplyError::Malformed { id, .. })) => assert!(!id.is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn silent_oracle_times_out() {
    let vs = variants(3);
    let t = Instant::now();
    match run("--fault hang", &vs, cfg(200, 1)) {
        Err(OracleError::GaveUp { attempts: 2, last, .. }) => assert!(last.contains("no reply within"), "{last}"),
        other => panic!("{other:?}"),
    }
    assert!(t.elapsed() < Duration::from_secs(5));
}

#[test]
fn missing_command_is_a_transport_failure() {
    let vs = variants(1);
    let r = ProcessOracle::new("/nonexistent/oracle-binary", cfg(2000, 0)).query(&vs, 1, false);
    assert!(r.is_err());
}

/// Minimal HTTP/1.1 server answering with the stub; the first request gets 503.
fn serve(vocab: StubVocab, hits: Arc<AtomicUsize>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let l = line.to_ascii_lowercase();
                if let Some(v) = l.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let n = hits.fetch_add(1, Ordering::SeqCst);
            let (status, reply) = if n == 0 {
                ("503 Service Unavailable", String::new())
            } else {
                let req: Request = serde_json::from_slice(&body).unwrap();
                let pos = req.window.iter().position(|t| t == "<mask>").unwrap();
                let props = vocab.propose_for_window(None, &req.window, pos, req.k);
                let mut filled = req.window.clone();
                filled[pos] = props[0].token.clone();
                let resp = Response {
                    id: req.id,
                    propositions: Some(props.into_iter().map(|p| WireProposition { token: p.token, confidence: p.confidence }).collect()),
                    emb_orig: req.embeddings.then(|| hashed_embedding(&req.window)),
                    emb_pred: req.embeddings.then(|| hashed_embedding(&filled)),
                    error: None,
                    note: None,
                    v: VERSION,
                };
                ("200 OK", serde_json::to_string(&resp).unwrap())
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    format!("http://{addr}/predict")
}

#[test]
fn http_transport_with_retry() {
    let b = synthetic_bundle(11, 0);
    let vocab = StubVocab::from_sources(b.files().iter().map(|f| f.content.as_str())).unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let url = serve(vocab, Arc::clone(&hits));
    let vs = variants(12);
    let recs = HttpOracle::new(url, cfg(5000, 2)).query(&vs, 2, true).unwrap();
    assert_eq!(recs.len(), 12);
    assert_eq!(hits.load(Ordering::SeqCst), 13);
    for (r, v) in recs.iter().zip(&vs) {
        assert_eq!(r.variant_ref.token_index, v.site.token_index);
        assert!(r.embedding_original.is_some());
        r.validate().unwrap();
    }
}
