//! Test-only reference implementations. Nothing here calls into the
//! simulator's state-vector kernels.
#![allow(dead_code)]

use qflsim::quantum::Complex64;

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2×2 rotation matrix about axis 0 (X), 1 (Y) or 2 (Z).
pub fn rotation_matrix(axis: usize, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = ((theta / 2.0).sin(), (theta / 2.0).cos());
    match axis {
        0 => [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]],
        1 => [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]],
        _ => [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]],
    }
}

/// Full 2^Q matrix of a single-qubit gate; qubit 0 is the lowest index bit.
pub fn embed(g: &[[Complex64; 2]; 2], target: usize, num_qubits: usize) -> Matrix {
    let dim = 1 << num_qubits;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut v = c(1.0, 0.0);
            for q in 0..num_qubits {
                let (bi, bj) = ((i >> q) & 1, (j >> q) & 1);
                v *= if q == target {
                    g[bi][bj]
                } else if bi == bj {
                    c(1.0, 0.0)
                } else {
                    c(0.0, 0.0)
                };
            }
            *cell = v;
        }
    }
    m
}

#[allow(clippy::needless_range_loop)]
pub fn cnot_matrix(control: usize, target: usize, num_qubits: usize) -> Matrix {
    let dim = 1 << num_qubits;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for j in 0..dim {
        let i = if (j >> control) & 1 == 1 { j ^ (1 << target) } else { j };
        m[i][j] = c(1.0, 0.0);
    }
    m
}

pub fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Class probabilities of the layered ansatz, computed densely.
pub fn dense_class_probs(
    num_qubits: usize,
    num_layers: usize,
    num_classes: usize,
    params: &[f64],
    features: &[f64],
) -> Vec<f64> {
    let dim = 1 << num_qubits;
    let norm = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut state = vec![c(0.0, 0.0); dim];
    if norm == 0.0 {
        state[0] = c(1.0, 0.0);
    } else {
        for (s, x) in state.iter_mut().zip(features) {
            *s = c(x / norm, 0.0);
        }
    }
    for layer in 0..num_layers {
        for q in 0..num_qubits {
            for axis in 0..3 {
                let theta = params[3 * (layer * num_qubits + q) + axis];
                state = mat_vec(&embed(&rotation_matrix(axis, theta), q, num_qubits), &state);
            }
        }
        if num_qubits > 1 {
            for q in 0..num_qubits {
                state = mat_vec(&cnot_matrix(q, (q + 1) % num_qubits, num_qubits), &state);
            }
        }
    }
    let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
    let kept = &probs[..num_classes];
    let mass: f64 = kept.iter().sum();
    if mass < 1e-12 {
        vec![1.0 / num_classes as f64; num_classes]
    } else {
        kept.iter().map(|p| p / mass).collect()
    }
}

pub fn dense_batch_loss(
    num_qubits: usize,
    num_layers: usize,
    num_classes: usize,
    params: &[f64],
    batch: &[(Vec<f64>, usize)],
) -> f64 {
    batch
        .iter()
        .map(|(x, y)| {
            let p = dense_class_probs(num_qubits, num_layers, num_classes, params, x);
            -p[*y].max(1e-12).ln()
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Size-weighted mean by direct summation.
pub fn brute_weighted_mean(params: &[Vec<f64>], sizes: &[usize]) -> Vec<f64> {
    let total: f64 = sizes.iter().map(|&s| s as f64).sum();
    (0..params[0].len())
        .map(|j| {
            params
                .iter()
                .zip(sizes)
                .map(|(p, &s)| s as f64 * p[j])
                .sum::<f64>()
                / total
        })
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Parsed server-sent event.
#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub event: String,
    pub id: Option<String>,
    pub data: String,
}

pub fn parse_sse(body: &str) -> Vec<SseEvent> {
    let mut out = Vec::new();
    for block in body.replace("\r\n", "\n").split("\n\n") {
        let mut ev = SseEvent {
            event: "message".into(),
            id: None,
            data: String::new(),
        };
        let mut has_data = false;
        for line in block.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                ev.event = v.trim().to_string();
            } else if let Some(v) = line.strip_prefix("id:") {
                ev.id = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                if has_data {
                    ev.data.push('\n');
                }
                ev.data.push_str(v.strip_prefix(' ').unwrap_or(v));
                has_data = true;
            }
        }
        if has_data {
            out.push(ev);
        }
    }
    out
}

/// A service on an ephemeral port with its own runtime thread.
pub struct TestServer {
    pub base: String,
    pub runs_dir: tempfile::TempDir,
    _runtime: tokio::runtime::Runtime,
}

impl TestServer {
    pub fn start() -> Self {
        Self::start_with(|_| {})
    }

    pub fn start_with(tweak: impl FnOnce(&mut qflsim::interface::server::ServerConfig)) -> Self {
        use qflsim::interface::server::{bind, ServerConfig};
        let runs_dir = tempfile::tempdir().unwrap();
        let mut config = ServerConfig {
            bind: "127.0.0.1:0".parse().unwrap(),
            runs_dir: runs_dir.path().to_path_buf(),
            ..ServerConfig::default()
        };
        tweak(&mut config);
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let (listener, app) = runtime.block_on(bind(&config)).unwrap();
        let addr = listener.local_addr().unwrap();
        runtime.spawn(async move { axum::serve(listener, app).await });
        Self {
            base: format!("http://{addr}"),
            runs_dir,
            _runtime: runtime,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}
