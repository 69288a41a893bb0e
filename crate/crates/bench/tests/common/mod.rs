#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use alp_core::clock::FrozenClock;
use alp_core::dataset::{gaussian_classes, GaussianSpec};
use alp_core::learners::{LearnerKind, LearnerSpec, NativeFitter};
use alp_core::pipeline::{run_alp, AlpSpec, RunRecord};
use alp_core::qs::{Strategy, StrategySpec};
use alp_core::setting::{Scenario, SettingChoice};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn adapter(mode: &str) -> Vec<String> {
    vec![
        "python3".into(),
        fixtures().join("mock_adapter.py").display().to_string(),
        mode.into(),
    ]
}

pub fn scenario(dataset_ref: &str, seed: u64) -> Scenario {
    Scenario {
        dataset_ref: dataset_ref.into(),
        setting: SettingChoice::Template("small-dynamic".into()),
        split_seed: seed,
        pipeline_seed: seed,
    }
}

/// A small completed record produced by the engine itself.
pub fn sample_record(kind: LearnerKind, strategy: Strategy, seed: u64) -> RunRecord {
    let ds = gaussian_classes(&GaussianSpec {
        n: 120,
        n_classes: 2,
        dims: 2,
        separation: 1.0,
        seed: 0,
    })
    .unwrap();
    let alp = AlpSpec::new(LearnerSpec::new(kind), StrategySpec::new(strategy)).unwrap();
    run_alp(&scenario(&ds.source_id, seed), &alp, &ds, &NativeFitter, &FrozenClock).unwrap()
}

/// Relative path → bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&dir) else { continue };
        for entry in entries {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Serves fixed paths over HTTP/1.1 on localhost and counts requests.
pub struct MockServer {
    pub base: String,
    pub hits: Arc<AtomicUsize>,
}

impl MockServer {
    pub fn start(routes: impl Fn(&str, &str) -> Option<Vec<u8>> + Send + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        let base_for_routes = base.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                loop {
                    let mut header = String::new();
                    if reader.read_line(&mut header).map_or(true, |n| n == 0) || header == "\r\n" {
                        break;
                    }
                }
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let (status, body) = match routes(&base_for_routes, &path) {
                    Some(b) => ("200 OK", b),
                    None => ("404 Not Found", b"not found".to_vec()),
                };
                let head = format!(
                    "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                    body.len()
                );
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&body);
            }
        });
        Self { base, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

/// The id-61 fixture served the way the OpenML API serves it.
pub fn openml_routes(tamper_md5: bool) -> impl Fn(&str, &str) -> Option<Vec<u8>> + Send + 'static {
    let desc = std::fs::read_to_string(fixtures().join("openml/61.json")).unwrap();
    let arff = std::fs::read(fixtures().join("openml/61.arff")).unwrap();
    move |base: &str, path: &str| match path {
        "/api/v1/json/data/61" => {
            let mut d = desc.replace("{BASE}", base);
            if tamper_md5 {
                d = d.replace("\"md5_checksum\": \"", "\"md5_checksum\": \"0");
            }
            Some(d.into_bytes())
        }
        "/data/v1/download/61/iris.arff" => Some(arff.clone()),
        _ => None,
    }
}
