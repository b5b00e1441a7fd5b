//! Line-delimited JSON codec protocol over a child process's stdio.
//!
//! Request:  `{"op":"hello"|"encode"|"decode","id":N,"payload":{..}}`
//! Response: `{"id":N,"result":{..}}` or `{"id":N,"error":{"code":..,"message":..}}`
//!
//! * hello  → `{"latent_dim":d,"image_shape":[h,w,c],"name":".."}`
//! * encode `{"images":[img..]}` → `{"latents":[[..]..]}`
//! * decode `{"latents":[[..]..]}` → `{"images":[img..]}`
//!
//! Images travel as `{"h","w","channels","data_b64"}` with f32 little-endian
//! data, row-major and channel-interleaved.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::{Codec, Image, ImageShape};
use crate::error::{Error, Result};
use crate::latent::LatentVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub data_b64: String,
}

impl WireImage {
    pub fn from_image(image: &Image) -> WireImage {
        let shape = image.shape();
        let mut bytes = Vec::with_capacity(shape.len() * 4);
        for &v in image.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        WireImage {
            h: shape.height,
            w: shape.width,
            channels: shape.channels,
            data_b64: STANDARD.encode(bytes),
        }
    }

    pub fn to_image(&self) -> Result<Image> {
        let bytes = STANDARD
            .decode(&self.data_b64)
            .map_err(|e| Error::CodecProtocol(format!("bad base64 image data: {e}")))?;
        let shape = ImageShape {
            height: self.h,
            width: self.w,
            channels: self.channels,
        };
        if bytes.len() != shape.len() * 4 {
            return Err(Error::CodecProtocol(format!(
                "image data has {} bytes, shape needs {}",
                bytes.len(),
                shape.len() * 4
            )));
        }
        Image::new(shape, super::latent_file::read_f32s(&bytes))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Hello {
    latent_dim: usize,
    image_shape: [usize; 3],
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Images {
    images: Vec<WireImage>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Latents {
    latents: Vec<Vec<f64>>,
}

struct Session {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

impl Session {
    fn call(&mut self, op: &str, payload: Value) -> Result<Value> {
        let id = self.next_id;
        self.next_id += 1;
        let line = json!({ "op": op, "id": id, "payload": payload }).to_string();
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::CodecUnavailable("codec stdin is closed".into()))?;
        // A failed write still leaves whatever the process printed readable.
        let write_err = writeln!(stdin, "{line}").and_then(|_| stdin.flush()).err();

        let mut reply = String::new();
        let read = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::CodecUnavailable(format!("cannot read from codec: {e}")))?;
        if read == 0 {
            return Err(Error::CodecUnavailable(match write_err {
                Some(e) => format!("cannot write to codec: {e}"),
                None => format!("codec closed its output before answering `{op}`"),
            }));
        }
        let reply: Value = serde_json::from_str(reply.trim_end())
            .map_err(|e| Error::CodecProtocol(format!("unparseable response to `{op}`: {e}")))?;
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::CodecProtocol(format!(
                "response id {} does not match request id {id}",
                reply.get("id").unwrap_or(&Value::Null)
            )));
        }
        if let Some(err) = reply.get("error") {
            let code = err.get("code").and_then(Value::as_str).unwrap_or("unknown");
            let message = err.get("message").and_then(Value::as_str).unwrap_or("");
            return Err(Error::CodecProtocol(format!(
                "`{op}` failed: {code}: {message}"
            )));
        }
        reply
            .get("result")
            .cloned()
            .ok_or_else(|| Error::CodecProtocol(format!("response to `{op}` has no result")))
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        drop(self.stdin.take());
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(std::time::Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A codec served by an external process.
pub struct ProcessCodec {
    name: String,
    latent_dim: usize,
    shape: ImageShape,
    session: Mutex<Session>,
}

impl std::fmt::Debug for ProcessCodec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProcessCodec")
            .field("name", &self.name)
            .field("latent_dim", &self.latent_dim)
            .field("shape", &self.shape)
            .finish()
    }
}

impl ProcessCodec {
    /// Runs `command` through `sh -c` and performs the hello handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::CodecUnavailable(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut session = Session {
            child,
            stdin,
            stdout,
            next_id: 0,
        };
        let hello = session.call("hello", json!({}))?;
        let hello: Hello = serde_json::from_value(hello)
            .map_err(|e| Error::CodecProtocol(format!("malformed hello: {e}")))?;
        let [height, width, channels] = hello.image_shape;
        let shape = ImageShape {
            height,
            width,
            channels,
        };
        if hello.latent_dim == 0 || shape.is_empty() {
            return Err(Error::CodecProtocol(format!(
                "hello reports latent_dim {} and image shape {:?}",
                hello.latent_dim, hello.image_shape
            )));
        }
        Ok(ProcessCodec {
            name: hello.name,
            latent_dim: hello.latent_dim,
            shape,
            session: Mutex::new(session),
        })
    }

    fn call(&self, op: &str, payload: Value) -> Result<Value> {
        let mut session = self
            .session
            .lock()
            .map_err(|_| Error::CodecUnavailable("codec session poisoned".into()))?;
        session.call(op, payload)
    }
}

impl Codec for ProcessCodec {
    fn name(&self) -> &str {
        &self.name
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn image_shape(&self) -> ImageShape {
        self.shape
    }

    fn encode(&self, images: &[Image]) -> Result<Vec<LatentVector>> {
        if let Some(im) = images.iter().find(|im| im.shape() != self.shape) {
            return Err(Error::CodecProtocol(format!(
                "image shape {:?} does not match codec shape {:?}",
                im.shape(),
                self.shape
            )));
        }
        let payload = Images {
            images: images.iter().map(WireImage::from_image).collect(),
        };
        let result = self.call("encode", serde_json::to_value(payload)?)?;
        let Latents { latents } = serde_json::from_value(result)
            .map_err(|e| Error::CodecProtocol(format!("malformed encode result: {e}")))?;
        if latents.len() != images.len() {
            return Err(Error::CodecProtocol(format!(
                "encode returned {} latents for {} images",
                latents.len(),
                images.len()
            )));
        }
        latents
            .into_iter()
            .map(|z| {
                if z.len() != self.latent_dim {
                    return Err(Error::CodecProtocol(format!(
                        "encode returned dim {}, expected {}",
                        z.len(),
                        self.latent_dim
                    )));
                }
                LatentVector::new(z).map_err(|e| Error::CodecProtocol(e.to_string()))
            })
            .collect()
    }

    fn decode(&self, latents: &[LatentVector]) -> Result<Vec<Image>> {
        if let Some(z) = latents.iter().find(|z| z.dim() != self.latent_dim) {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim,
                found: z.dim(),
            });
        }
        let payload = Latents {
            latents: latents.iter().map(|z| z.as_slice().to_vec()).collect(),
        };
        let result = self.call("decode", serde_json::to_value(payload)?)?;
        let Images { images } = serde_json::from_value(result)
            .map_err(|e| Error::CodecProtocol(format!("malformed decode result: {e}")))?;
        if images.len() != latents.len() {
            return Err(Error::CodecProtocol(format!(
                "decode returned {} images for {} latents",
                images.len(),
                latents.len()
            )));
        }
        images
            .iter()
            .map(|w| {
                let im = w.to_image()?;
                if im.shape() != self.shape {
                    return Err(Error::CodecProtocol(
                        "decoded image has the wrong shape".into(),
                    ));
                }
                Ok(im)
            })
            .collect()
    }
}

fn error_response(id: Value, code: &str, message: impl std::fmt::Display) -> Value {
    json!({ "id": id, "error": { "code": code, "message": message.to_string() } })
}

fn handle(codec: &dyn Codec, request: &Value) -> Value {
    let id = request.get("id").cloned().unwrap_or(Value::Null);
    let Some(op) = request.get("op").and_then(Value::as_str) else {
        return error_response(id, "bad_request", "missing `op`");
    };
    let payload = request.get("payload").cloned().unwrap_or(Value::Null);
    let result = match op {
        "hello" => {
            let s = codec.image_shape();
            Ok(json!(Hello {
                latent_dim: codec.latent_dim(),
                image_shape: [s.height, s.width, s.channels],
                name: codec.name().to_owned(),
            }))
        }
        "encode" => {
            let images = match serde_json::from_value::<Images>(payload) {
                Ok(p) => p.images,
                Err(e) => return error_response(id, "bad_request", e),
            };
            let images = match images
                .iter()
                .map(WireImage::to_image)
                .collect::<Result<Vec<_>>>()
            {
                Ok(v) => v,
                Err(e) => return error_response(id, "bad_request", e),
            };
            codec.encode(&images).map(|zs| {
                json!(Latents {
                    latents: zs.into_iter().map(LatentVector::into_inner).collect(),
                })
            })
        }
        "decode" => {
            let latents = match serde_json::from_value::<Latents>(payload) {
                Ok(p) => p.latents,
                Err(e) => return error_response(id, "bad_request", e),
            };
            let latents = match latents
                .into_iter()
                .map(LatentVector::new)
                .collect::<Result<Vec<_>>>()
            {
                Ok(v) => v,
                Err(e) => return error_response(id, "bad_request", e),
            };
            codec.decode(&latents).map(|ims| {
                json!(Images {
                    images: ims.iter().map(WireImage::from_image).collect(),
                })
            })
        }
        other => return error_response(id, "unknown_op", format!("unknown op `{other}`")),
    };
    match result {
        Ok(result) => json!({ "id": id, "result": result }),
        Err(e) => error_response(id, "codec_error", e),
    }
}

/// Answers protocol requests from `input` until end of stream. Every
/// non-blank line gets exactly one response line.
pub fn serve(codec: &dyn Codec, input: impl BufRead, mut output: impl Write) -> Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Value>(&line) {
            Ok(request) => handle(codec, &request),
            Err(e) => error_response(Value::Null, "bad_request", e),
        };
        writeln!(output, "{response}")?;
        output.flush()?;
    }
    Ok(())
}
