//! The stub oracle behind the wire protocol, on stdin/stdout. Used to
//! exercise the `cmd:` transport; `--fault` injects misbehaviour.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use clap::Parser;
use natrank::protocol::{Request, Response, WireProposition, VERSION};
use natrank_core::oracle::{fnv1a, hashed_embedding, StubVocab};
use walkdir::WalkDir;

#[derive(Debug, Parser)]
struct Args {
    /// Build the vocabulary from the .java files under this directory;
    /// otherwise each request's own window is its vocabulary.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// jitter | crash-after=N | stray | bad-version | error | hang | malformed
    #[arg(long)]
    fault: Option<String>,
}

enum Fault {
    None,
    /// Replies after an id-dependent delay, so out of order.
    Jitter,
    CrashAfter(usize),
    Stray,
    BadVersion,
    Error,
    Hang,
    Malformed,
}

fn parse_fault(s: Option<&str>) -> Result<Fault, String> {
    Ok(match s {
        None => Fault::None,
        Some("jitter") => Fault::Jitter,
        Some("stray") => Fault::Stray,
        Some("bad-version") => Fault::BadVersion,
        Some("error") => Fault::Error,
        Some("hang") => Fault::Hang,
        Some("malformed") => Fault::Malformed,
        Some(other) => match other.strip_prefix("crash-after=").map(str::parse) {
            Some(Ok(n)) => Fault::CrashAfter(n),
            _ => return Err(format!("unknown fault {other:?}")),
        },
    })
}

fn answer(req: &Request, vocab: Option<&StubVocab>) -> Response {
    if req.v != VERSION {
        return Response::error(req.id.clone(), "unsupported version");
    }
    let Some(pos) = req.window.iter().position(|t| t == "<mask>") else {
        return Response::error(req.id.clone(), "window has no <mask>");
    };
    let local;
    let vocab = match vocab {
        Some(v) => v,
        None => {
            let text: Vec<&str> = req.window.iter().filter(|t| *t != "<mask>").map(String::as_str).collect();
            match StubVocab::from_sources([text.join(" ").as_str()]) {
                Ok(v) => {
                    local = v;
                    &local
                }
                Err(e) => return Response::error(req.id.clone(), e.to_string()),
            }
        }
    };
    let props = vocab.propose_for_window(None, &req.window, pos, req.k);
    let fill = |t: &str| {
        let mut w = req.window.clone();
        w[pos] = t.to_string();
        hashed_embedding(&w)
    };
    // The request does not carry the original token: embed the masked window.
    let (emb_orig, emb_pred) = if req.embeddings {
        (Some(hashed_embedding(&req.window)), Some(fill(&props[0].token)))
    } else {
        (None, None)
    };
    Response {
        id: req.id.clone(),
        propositions: Some(
            props
                .into_iter()
                .map(|p| WireProposition {
                    token: p.token,
                    confidence: p.confidence,
                })
                .collect(),
        ),
        emb_orig,
        emb_pred,
        error: None,
        note: None,
        v: VERSION,
    }
}

fn load_vocab(dir: &PathBuf) -> Result<StubVocab, String> {
    let mut texts = Vec::new();
    for e in WalkDir::new(dir).sort_by_file_name() {
        let e = e.map_err(|e| e.to_string())?;
        if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java") {
            texts.push(std::fs::read_to_string(e.path()).map_err(|err| format!("{}: {err}", e.path().display()))?);
        }
    }
    StubVocab::from_sources(texts.iter().map(String::as_str)).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let fault = match parse_fault(args.fault.as_deref()) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let vocab = match args.sources.as_ref().map(load_vocab).transpose() {
        Ok(v) => v.map(Arc::new),
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let out = Arc::new(Mutex::new(io::stdout()));
    let emit = |out: &Mutex<io::Stdout>, line: String| {
        let mut o = out.lock().expect("stdout lock");
        let _ = writeln!(o, "{line}");
        let _ = o.flush();
    };
    let mut workers = Vec::new();
    let mut answered = 0usize;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                emit(&out, serde_json::to_string(&Response::error("", format!("bad request: {e}"))).unwrap());
                continue;
            }
        };
        let mut resp = answer(&req, vocab.as_deref());
        match fault {
            Fault::Hang => continue,
            Fault::CrashAfter(n) if answered >= n => return ExitCode::from(3),
            Fault::Stray => resp.id = format!("{}-stray", resp.id),
            Fault::BadVersion => resp.v = 2,
            Fault::Error => resp = Response::error(req.id.clone(), "injected failure"),
            Fault::Malformed => {
                emit(&out, format!("{{\"id\":\"{}\",\"propositions\":7,\"v\":1}}", req.id));
                continue;
            }
            _ => {}
        }
        answered += 1;
        let text = serde_json::to_string(&resp).expect("response serializes");
        if matches!(fault, Fault::Jitter) {
            let out = Arc::clone(&out);
            let delay = fnv1a(req.id.as_bytes()) % 15;
            workers.push(thread::spawn(move || {
                thread::sleep(Duration::from_millis(delay));
                emit(&out, text);
            }));
        } else {
            emit(&out, text);
        }
    }
    for w in workers {
        let _ = w.join();
    }
    ExitCode::SUCCESS
}
