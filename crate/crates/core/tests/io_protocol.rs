mod common;

use std::fs;
use std::process::Command;

use latentkit::cli;
use latentkit::io::render::{render_grid, RenderOptions};
use latentkit::io::{read_features, write_features, ProcessCodec};
use latentkit::toy::{toy_dataset, ToyCodec, ToyDatasetSpec};
use latentkit::{CellRole, Codec, Error, GridManifest, LatentVector};

const BIN: &str = env!("CARGO_BIN_EXE_latentkit");

fn toy_cmd(dim: usize, hw: &str) -> String {
    format!("'{BIN}' toy-codec --dim {dim} --codec-seed 4 --image {hw}")
}

#[test]
fn process_codec_mirrors_in_process_codec() {
    let remote = ProcessCodec::spawn(&toy_cmd(6, "8x8")).unwrap();
    let local = ToyCodec::new(4, 6, 8, 8).unwrap();
    assert_eq!(remote.latent_dim(), 6);
    assert_eq!(remote.image_shape(), local.image_shape());
    assert_eq!(remote.name(), "toy-linear");
    let mut r = common::rng(1);
    let zs: Vec<LatentVector> = (0..5).map(|_| common::gaussian_vec(&mut r, 6)).collect();
    let remote_imgs = remote.decode(&zs).unwrap();
    let local_imgs = local.decode(&zs).unwrap();
    for (a, b) in remote_imgs.iter().zip(&local_imgs) {
        // Images cross the wire as f32.
        assert!(common::max_abs_diff(a.data(), b.data()) < 1e-6);
    }
    let back = remote.encode(&remote_imgs).unwrap();
    for (z, w) in zs.iter().zip(&back) {
        assert!(common::max_abs_diff(z.as_slice(), w.as_slice()) < 1e-5);
    }
    assert!(matches!(
        remote.decode(&[LatentVector::new(vec![1.0]).unwrap()]),
        Err(Error::DimensionMismatch { .. })
    ));
}

fn stub(dir: &std::path::Path, hello: &str) -> String {
    let log = dir.join("requests.log");
    let script = dir.join("stub.sh");
    fs::write(
        &script,
        format!(
            "while IFS= read -r line; do echo \"$line\" >> '{}'; echo '{}'; done\n",
            log.display(),
            hello
        ),
    )
    .unwrap();
    format!("sh '{}'", script.display())
}

#[test]
fn bad_hello_is_rejected_before_any_other_request() {
    let cases = [
        r#"{"id":0,"result":{"latent_dim":0,"image_shape":[4,4,1],"name":"x"}}"#,
        r#"{"id":0,"result":{"latent_dim":3,"image_shape":[4,4],"name":"x"}}"#,
        r#"{"id":5,"result":{"latent_dim":3,"image_shape":[4,4,1],"name":"x"}}"#,
        r#"{"id":0,"error":{"code":"codec_error","message":"no model"}}"#,
        r#"not json"#,
    ];
    for hello in cases {
        let dir = tempfile::tempdir().unwrap();
        let err = ProcessCodec::spawn(&stub(dir.path(), hello)).unwrap_err();
        assert!(matches!(err, Error::CodecProtocol(_)), "{hello}: {err}");
        let log = fs::read_to_string(dir.path().join("requests.log")).unwrap();
        assert_eq!(log.lines().count(), 1);
        assert!(log.contains("\"op\":\"hello\""));
    }
}

#[test]
fn missing_codec_is_unavailable() {
    let err = ProcessCodec::spawn("exec /nonexistent/codec-binary").unwrap_err();
    assert!(matches!(err, Error::CodecUnavailable(_)), "{err}");
    let err = ProcessCodec::spawn("true").unwrap_err();
    assert!(matches!(err, Error::CodecUnavailable(_)), "{err}");
}

fn tile_manifest(dim: usize) -> GridManifest {
    let mut r = common::rng(9);
    let entries = (0..4)
        .map(|_| {
            (
                CellRole::Interpolated,
                None,
                common::gaussian_vec(&mut r, dim),
            )
        })
        .collect();
    GridManifest::from_row_major(2, 2, entries, Default::default()).unwrap()
}

#[test]
fn render_dimensions_determinism_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let codec = ToyCodec::new(2, 8, 32, 32).unwrap();
    let m = tile_manifest(8);
    let (p1, p2) = (dir.path().join("a.png"), dir.path().join("b.png"));
    render_grid(&m, &codec, &p1, RenderOptions::default()).unwrap();
    render_grid(&m, &codec, &p2, RenderOptions::default()).unwrap();
    assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    let decoder = png::Decoder::new(std::io::BufReader::new(fs::File::open(&p1).unwrap()));
    let reader = decoder.read_info().unwrap();
    let info = reader.info();
    assert_eq!((info.width, info.height), (65, 65));
    assert_eq!(info.color_type, png::ColorType::Grayscale);
    assert_eq!(info.bit_depth, png::BitDepth::Eight);

    let mut bad = m.clone();
    bad.cells[3].latent = LatentVector::new(vec![0.5; 7]).unwrap();
    let p3 = dir.path().join("bad.png");
    let err = render_grid(&bad, &codec, &p3, RenderOptions::default()).unwrap_err();
    assert!(matches!(err, Error::CodecProtocol(_)));
    assert!(!p3.exists());
}

#[test]
fn render_through_process_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let m = tile_manifest(6);
    let local = ToyCodec::new(4, 6, 8, 8).unwrap();
    let remote = ProcessCodec::spawn(&toy_cmd(6, "8x8")).unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    render_grid(&m, &local, &a, RenderOptions::default()).unwrap();
    render_grid(&m, &remote, &b, RenderOptions::default()).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn feature_file_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let codec = ToyCodec::new(1, 4, 6, 5).unwrap();
    let (_, feats) =
        toy_dataset(&ToyDatasetSpec::new(20, 4, 2, &["smile"]).unwrap(), &codec).unwrap();
    let path = dir.path().join("f.feat");
    write_features(&feats, &path).unwrap();
    let back = read_features(&path).unwrap();
    let path2 = dir.path().join("g.feat");
    write_features(&back, &path2).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    for (a, b) in feats.images().iter().zip(back.images()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.clamp(0.0, 1.0) as f32 as f64, *y);
        }
    }
}

fn run(args: &[&str]) -> (i32, Vec<u8>, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["latentkit"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (code, out, String::from_utf8(err).unwrap())
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.latd");
    let data = data.to_str().unwrap();
    assert_eq!(
        run(&["toygen", "--n", "50", "--dim", "4", "-o", data]).0,
        cli::EXIT_OK
    );

    assert_eq!(run(&["toygen", "--n"]).0, cli::EXIT_USAGE);
    assert_eq!(
        run(&[
            "mine",
            "--data",
            data,
            "--metric",
            "manhattan",
            "--seed-id",
            "toy-00000"
        ])
        .0,
        cli::EXIT_USAGE
    );

    let (code, _, err) = run(&["priorstats", "--data", "/nonexistent.latd"]);
    assert_eq!(code, cli::EXIT_DATA);
    assert!(err.starts_with("error:"));
    assert_eq!(
        run(&[
            "interpolate",
            "--data",
            data,
            "--from",
            "toy-00000",
            "--to",
            "nobody"
        ])
        .0,
        cli::EXIT_DATA
    );
    assert_eq!(
        run(&["attrvec", "--data", data, "--attr", "missing"]).0,
        cli::EXIT_DATA
    );
    assert_eq!(
        run(&["toygen", "--proportions", "0.5,0.5,0.5,0.5"]).0,
        cli::EXIT_DATA
    );

    let manifest = dir.path().join("m.json");
    let manifest = manifest.to_str().unwrap();
    assert_eq!(
        run(&[
            "mine",
            "--data",
            data,
            "--seed-id",
            "toy-00001",
            "--anchors",
            "2x2",
            "--spread",
            "2",
            "-o",
            manifest
        ])
        .0,
        cli::EXIT_OK
    );
    let png_path = dir.path().join("m.png");
    let png_path = png_path.to_str().unwrap();
    assert_eq!(
        run(&[
            "render",
            "--manifest",
            manifest,
            "--codec",
            "cmd",
            "-o",
            png_path
        ])
        .0,
        cli::EXIT_CODEC
    );
    assert_eq!(
        run(&[
            "render",
            "--manifest",
            manifest,
            "--codec-cmd",
            "exec /nonexistent/x",
            "-o",
            png_path
        ])
        .0,
        cli::EXIT_CODEC
    );
    let wrong_dim = toy_cmd(5, "8x8");
    let (code, _, err) = run(&[
        "render",
        "--manifest",
        manifest,
        "--codec-cmd",
        &wrong_dim,
        "-o",
        png_path,
    ]);
    assert_eq!(code, cli::EXIT_CODEC, "{err}");
    assert!(!std::path::Path::new(png_path).exists());
    assert_eq!(
        run(&[
            "render",
            "--manifest",
            manifest,
            "--codec",
            "toy",
            "--image",
            "8x8",
            "-o",
            png_path
        ])
        .0,
        cli::EXIT_OK
    );
}

#[test]
fn binary_reports_exit_codes_and_streams() {
    let out = Command::new(BIN)
        .args([
            "interpolate",
            "--from",
            "1,0",
            "--to",
            "0,1",
            "--steps",
            "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let m = GridManifest::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!((m.rows, m.cols), (1, 3));
    let out = Command::new(BIN)
        .args(["interpolate", "--from", "1,0", "--to", "-1,0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(cli::EXIT_DATA));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("antipodal"));
    let out = Command::new(BIN).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(cli::EXIT_USAGE));
}

#[test]
fn csv_and_binary_convert_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_owned();
    assert_eq!(
        run(&[
            "toygen",
            "--n",
            "30",
            "--dim",
            "3",
            "--seed",
            "5",
            "-o",
            &p("a.latd")
        ])
        .0,
        0
    );
    assert_eq!(
        run(&["convert", "--input", &p("a.latd"), "-o", &p("a.csv")]).0,
        0
    );
    assert_eq!(
        run(&["convert", "--input", &p("a.csv"), "-o", &p("b.latd")]).0,
        0
    );
    assert_eq!(
        fs::read(p("a.latd")).unwrap(),
        fs::read(p("b.latd")).unwrap()
    );
    let text = fs::read_to_string(p("a.csv")).unwrap();
    assert!(text.starts_with("id,z0,z1,z2,male,smile\n"));
}
