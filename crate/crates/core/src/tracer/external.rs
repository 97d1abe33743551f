//! Wire protocol for hosting a decision function outside the process.
//!
//! The parent spawns a child (through `sh -c`, so shell quoting works) and
//! exchanges newline-delimited JSON records over the child's stdin/stdout:
//!
//! * handshake, first record in both directions: `{"version":1}`
//! * request: `{"version":1,"step":N,"center":[x,y],"d":256,
//!   "resolution":0.6,"channels":"<base64>"}` where `channels` encodes the
//!   window as row-major little-endian float32, d×d×4 with interleaved
//!   channels (see [`DecisionInput`]).
//! * response: `{"o_walk":0.9,"o_stop":0.1,"angles":[...]}` with exactly
//!   `a` angle entries.
//!
//! Requests are strictly serialized: one request, then block for one
//! response. Responses are validated against the decision-output
//! invariants; any violation, child exit, or timeout aborts the search.
//!
//! [`serve_decider`] implements the child side for the crate's own
//! deciders. It mirrors the parent's search state locally (replaying its
//! own answers through the same threshold/step rules), so a ground-truth
//! oracle served over the wire reproduces the in-process run exactly.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{
    choose_action, DecisionContext, DecisionError, DecisionFunction, DecisionOutput, SearchState,
    TracerConfig,
};
use crate::geograph::BoundingBox;
use crate::geom::Point;
use crate::raster::Imagery;

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Serialize, Deserialize)]
struct Handshake {
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireRequest {
    pub version: u32,
    pub step: usize,
    pub center: [f64; 2],
    pub d: usize,
    pub resolution: f64,
    pub channels: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WireResponse {
    pub o_walk: f64,
    pub o_stop: f64,
    pub angles: Vec<f64>,
}

pub fn encode_channels(channels: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(channels.len() * 4);
    for v in channels {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

pub fn decode_channels(encoded: &str) -> Result<Vec<f32>, DecisionError> {
    let bytes = BASE64
        .decode(encoded)
        .map_err(|e| DecisionError::Protocol(format!("bad channels base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(DecisionError::Protocol("channel payload not a multiple of 4 bytes".into()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// A decision function backed by a child process speaking the wire
/// protocol.
pub struct ExternalDecider {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalDecider {
    /// Spawn `command` via `sh -c` and perform the version handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<ExternalDecider, DecisionError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        // Pipes have no read timeout; a detached reader thread feeding a
        // channel gives us recv_timeout.
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut decider = ExternalDecider { child, stdin, lines: rx, timeout };
        decider.send_line(&serde_json::to_string(&Handshake { version: PROTOCOL_VERSION }).unwrap())?;
        let reply = decider.recv_line()?;
        let shake: Handshake = serde_json::from_str(&reply)
            .map_err(|e| DecisionError::Protocol(format!("bad handshake: {e}")))?;
        if shake.version != PROTOCOL_VERSION {
            return Err(DecisionError::Protocol(format!(
                "protocol version mismatch: ours {PROTOCOL_VERSION}, child {}",
                shake.version
            )));
        }
        Ok(decider)
    }

    fn send_line(&mut self, line: &str) -> Result<(), DecisionError> {
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.write_all(b"\n"))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| DecisionError::Protocol(format!("child stdin closed: {e}")))
    }

    fn recv_line(&mut self) -> Result<String, DecisionError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(DecisionError::Io(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(DecisionError::Timeout(self.timeout)),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(DecisionError::Protocol("child exited before responding".into()))
            }
        }
    }
}

impl DecisionFunction for ExternalDecider {
    fn decide(&mut self, ctx: &mut DecisionContext<'_>) -> Result<DecisionOutput, DecisionError> {
        let step = ctx.step;
        let center = ctx.head_position();
        let window = ctx.window();
        let request = WireRequest {
            version: PROTOCOL_VERSION,
            step,
            center: [center.x, center.y],
            d: window.d,
            resolution: window.resolution,
            channels: encode_channels(&window.channels),
        };
        self.send_line(&serde_json::to_string(&request).unwrap())?;
        let line = self.recv_line()?;
        let response: WireResponse = serde_json::from_str(&line)
            .map_err(|e| DecisionError::Protocol(format!("bad response record: {e}")))?;
        Ok(DecisionOutput {
            o_walk: response.o_walk,
            o_stop: response.o_stop,
            angles: response.angles,
        })
    }
}

impl Drop for ExternalDecider {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Serve `decider` over the wire protocol (child side), reading requests
/// from `input` and writing responses to `output`.
///
/// The server rebuilds the parent's search state locally: each answered
/// request is replayed through the same action threshold and step rule,
/// and a request arriving with an empty mirror stack plants a new seed at
/// the request center. The `center` field doubles as a desync check.
pub fn serve_decider(
    decider: &mut dyn DecisionFunction,
    config: &TracerConfig,
    bbox: BoundingBox,
    imagery: &Imagery,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<(), DecisionError> {
    let mut lines = input.lines();
    let first = match lines.next() {
        Some(line) => line?,
        None => return Ok(()), // parent went away before handshaking
    };
    let shake: Handshake = serde_json::from_str(&first)
        .map_err(|e| DecisionError::Protocol(format!("bad handshake: {e}")))?;
    if shake.version != PROTOCOL_VERSION {
        return Err(DecisionError::Protocol(format!(
            "unsupported protocol version {}",
            shake.version
        )));
    }
    writeln!(output, "{}", serde_json::to_string(&Handshake { version: PROTOCOL_VERSION }).unwrap())?;
    output.flush()?;

    let mut state: Option<SearchState> = None;
    for line in lines {
        let line = line?;
        let request: WireRequest = serde_json::from_str(&line)
            .map_err(|e| DecisionError::Protocol(format!("bad request record: {e}")))?;
        let center = Point::new(request.center[0], request.center[1]);

        // A request with a drained (or absent) mirror stack means the
        // parent planted a fresh seed; its position is the request center.
        let needs_seed = state.as_ref().map_or(true, SearchState::is_finished);
        if needs_seed {
            match state.as_mut() {
                Some(st) => {
                    st.plant_seed(center);
                }
                None => state = Some(SearchState::new(center, bbox, config.step_distance)),
            }
        }
        let st = state.as_mut().unwrap();
        let head_pos = st.graph().position(st.head().expect("mirror stack nonempty"));
        if head_pos.distance(center) > 1e-6 {
            return Err(DecisionError::Protocol(format!(
                "mirror desync: request center ({}, {}) vs mirrored head ({}, {})",
                center.x, center.y, head_pos.x, head_pos.y
            )));
        }

        let out = {
            let mut ctx = DecisionContext::new(
                st.graph(),
                st.stack(),
                bbox,
                *config,
                request.step,
                imagery,
            );
            decider.decide(&mut ctx)?
        };
        out.validate(config.angle_buckets)?;
        let response =
            WireResponse { o_walk: out.o_walk, o_stop: out.o_stop, angles: out.angles.clone() };
        writeln!(output, "{}", serde_json::to_string(&response).unwrap())?;
        output.flush()?;

        let action = choose_action(&out, config.walk_threshold);
        st.step(action, config);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::run_search;

    fn bbox() -> BoundingBox {
        BoundingBox::new(-100.0, -100.0, 100.0, 100.0)
    }

    fn small_config() -> TracerConfig {
        TracerConfig { angle_buckets: 4, window_px: 8, ..TracerConfig::default() }
    }

    #[test]
    fn echo_stop_child_yields_single_vertex() {
        // A shell one-liner child: handshake, then answer every request
        // with a stop.
        let cmd = r#"read h; echo '{"version":1}'; while read l; do echo '{"o_walk":0.0,"o_stop":1.0,"angles":[0.0,0.0,0.0,0.0]}'; done"#;
        let mut decider = ExternalDecider::spawn(cmd, DEFAULT_TIMEOUT).unwrap();
        let outcome = run_search(
            Point::new(0.0, 0.0),
            bbox(),
            &Imagery::blank(),
            &mut decider,
            &small_config(),
        )
        .unwrap();
        assert_eq!(outcome.graph.vertex_count(), 1);
        assert_eq!(outcome.steps, 1);
    }

    #[test]
    fn invalid_probability_sum_is_protocol_error() {
        let cmd = r#"read h; echo '{"version":1}'; while read l; do echo '{"o_walk":0.7,"o_stop":0.7,"angles":[0.0,0.0,0.0,0.0]}'; done"#;
        let mut decider = ExternalDecider::spawn(cmd, DEFAULT_TIMEOUT).unwrap();
        let err = run_search(
            Point::new(0.0, 0.0),
            bbox(),
            &Imagery::blank(),
            &mut decider,
            &small_config(),
        )
        .unwrap_err();
        assert!(matches!(err, DecisionError::Protocol(_)), "got {err:?}");
    }

    #[test]
    fn version_mismatch_rejected() {
        let cmd = r#"read h; echo '{"version":99}'"#;
        match ExternalDecider::spawn(cmd, DEFAULT_TIMEOUT) {
            Err(DecisionError::Protocol(_)) => {}
            Err(other) => panic!("expected protocol error, got {other:?}"),
            Ok(_) => panic!("handshake with wrong version must fail"),
        }
    }

    #[test]
    fn child_exit_is_protocol_error() {
        let cmd = r#"read h; echo '{"version":1}'; exit 0"#;
        let mut decider = ExternalDecider::spawn(cmd, DEFAULT_TIMEOUT).unwrap();
        let err = run_search(
            Point::new(0.0, 0.0),
            bbox(),
            &Imagery::blank(),
            &mut decider,
            &small_config(),
        )
        .unwrap_err();
        assert!(matches!(err, DecisionError::Protocol(_)), "got {err:?}");
    }

    #[test]
    fn channels_encoding_round_trip() {
        let values: Vec<f32> = (0..64).map(|i| i as f32 / 63.0).collect();
        let decoded = decode_channels(&encode_channels(&values)).unwrap();
        assert_eq!(values, decoded);
    }

    #[test]
    fn served_stop_decider_over_pipes() {
        // Run the serve loop against an in-memory transcript.
        let mut transcript = Vec::new();
        transcript.extend_from_slice(b"{\"version\":1}\n");
        let request = WireRequest {
            version: 1,
            step: 0,
            center: [0.0, 0.0],
            d: 8,
            resolution: 0.6,
            channels: encode_channels(&vec![0.0; 8 * 8 * 4]),
        };
        transcript.extend_from_slice(serde_json::to_string(&request).unwrap().as_bytes());
        transcript.push(b'\n');

        let mut out = Vec::new();
        let mut decider = super::super::StopDecider;
        serve_decider(
            &mut decider,
            &small_config(),
            bbox(),
            &Imagery::blank(),
            &transcript[..],
            &mut out,
        )
        .unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        let shake: Handshake = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(shake.version, PROTOCOL_VERSION);
        let resp: WireResponse = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(resp.o_stop, 1.0);
        assert_eq!(resp.angles.len(), 4);
    }
}
