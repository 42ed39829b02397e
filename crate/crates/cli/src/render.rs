use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use lumisplat::brdf::{precompute_brdf_lut, BrdfLut, LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES};
use lumisplat::edit::{MaterialOverride, Overrides};
use lumisplat::imagebuf::LdrImage;
use lumisplat::sceneio::{channel_image, load_scene, mask_image, write_gbuffer, write_pfm, write_png, Channel};
use lumisplat::ssr::{surface_depth, trace_pixel, DepthView, HitResult, MissReason};
use lumisplat_service::session::Rendered;
use lumisplat_service::{EnvironmentRequest, InsertRequest, Session};
use serde_json::{json, Value};

use crate::args::{OutputArgs, SceneArgs, SettingsArgs};
use crate::CliError;

#[derive(Args, Debug)]
pub struct RenderCmd {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct EditCmd {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Material override `group.field=value`; field is roughness, metallic or
    /// albedo (`r,g,b`). Repeatable.
    #[arg(long = "set", value_name = "GROUP.FIELD=VALUE")]
    pub set: Vec<String>,
    /// JSON object mapping group names to partial materials.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    /// Equirectangular PFM replacing the environment.
    #[arg(long, conflicts_with = "env_constant")]
    pub env: Option<PathBuf>,
    /// Constant environment radiance `r,g,b`.
    #[arg(long, value_delimiter = ',')]
    pub env_constant: Option<Vec<f64>>,
    /// Environment rotation about +Y, radians.
    #[arg(long)]
    pub yaw: Option<f64>,
    /// G-buffer layer manifest to composite. Repeatable.
    #[arg(long)]
    pub insert: Vec<PathBuf>,
    /// JSON array of Gaussians to add. Repeatable.
    #[arg(long)]
    pub insert_group: Vec<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct TraceCmd {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Where hit_mask.png, pairs.png and pairs.json go.
    #[arg(short, long, default_value = "trace")]
    pub out_dir: PathBuf,
    /// Pixel spacing of the traced grid in the point-pair views.
    #[arg(long, default_value_t = 16)]
    pub stride: usize,
}

pub fn load_lut(path: Option<&Path>) -> Result<BrdfLut> {
    match path {
        Some(p) => BrdfLut::read_from(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(precompute_brdf_lut(LUT_DEFAULT_RESOLUTION, LUT_DEFAULT_SAMPLES, 0)?),
    }
}

fn open_session(args: &SceneArgs, settings: &SettingsArgs) -> Result<Session> {
    let scene = load_scene(&args.scene)?;
    for w in &scene.warnings {
        log::warn!("ignoring unknown scene field `{w}`");
    }
    let cwd = std::env::current_dir()?;
    let mut session = Session::new(scene, cwd)?.allow_any_path();
    if args.camera != 0 {
        session.select_camera(args.camera)?;
    }
    let s = settings.apply(session.settings().clone());
    s.validate()?;
    session.set_settings(s)?;
    Ok(session)
}

fn render(session: &Session, lut: &BrdfLut) -> Result<(Rendered, f64)> {
    let t = Instant::now();
    let r = session.snapshot().render(lut)?;
    Ok((r, t.elapsed().as_secs_f64()))
}

fn dump_channels(r: &Rendered, session: &Session, out: &OutputArgs) -> Result<Vec<PathBuf>> {
    let mut names: Vec<String> = Vec::new();
    for d in &out.dump {
        if d == "all" {
            names.extend(Channel::ALL.iter().map(|c| c.name().to_string()));
            names.push("hit_mask".into());
        } else {
            names.push(d.clone());
        }
    }
    let dir = out.dump_dir.clone().unwrap_or_else(|| out.output.parent().map(Path::to_path_buf).unwrap_or_default());
    if !names.is_empty() && !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    let gb = &r.frame.gbuffer;
    let mut written = Vec::new();
    for name in names {
        let img: LdrImage = match Channel::parse(&name) {
            Some(c) => channel_image(gb, c, session.camera()),
            None if name == "hit_mask" => mask_image(gb.width, gb.height, &r.frame.hit_mask()),
            None => bail!(CliError::Usage(format!("unknown channel `{name}`"))),
        };
        let path = dir.join(format!("{name}.png"));
        write_png(&img, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn write_outputs(r: &Rendered, seconds: f64, session: &Session, out: &OutputArgs) -> Result<Value> {
    if let Some(parent) = out.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out.output, &r.png).with_context(|| format!("writing {}", out.output.display()))?;
    if let Some(h) = &out.hdr {
        write_pfm(&r.frame.hdr, h)?;
    }
    let dumps = dump_channels(r, session, out)?;
    let manifest = out.gbuffer.as_ref().map(|d| write_gbuffer(&r.frame.gbuffer, d)).transpose()?;
    let gb = &r.frame.gbuffer;
    let hit = r.frame.indirect.as_ref().map(|i| i.hit_fraction.iter().sum::<f64>() / i.hit_fraction.len().max(1) as f64);
    let mut summary = json!({
        "output": out.output,
        "width": gb.width,
        "height": gb.height,
        "visible_gaussians": r.frame.stats.visible,
        "covered_pixels": (0..gb.len()).filter(|&i| gb.covered(i)).count(),
        "mean_hit_fraction": hit,
        "dumps": dumps,
        "gbuffer_manifest": manifest,
    });
    if out.time {
        summary["seconds"] = json!(seconds);
    }
    Ok(summary)
}

pub fn run_render(cmd: &RenderCmd) -> Result<Value> {
    let session = open_session(&cmd.scene, &cmd.settings)?;
    let lut = load_lut(cmd.scene.lut.as_deref())?;
    let (r, secs) = render(&session, &lut)?;
    write_outputs(&r, secs, &session, &cmd.output)
}

/// Parses `group.field=value`.
pub fn parse_set(spec: &str) -> Result<(String, MaterialOverride)> {
    let usage = || CliError::Usage(format!("expected GROUP.FIELD=VALUE, got `{spec}`"));
    let (lhs, value) = spec.split_once('=').ok_or_else(usage)?;
    let (group, field) = lhs.rsplit_once('.').ok_or_else(usage)?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("`{v}` is not a number in `{spec}`")));
    let mut o = MaterialOverride::default();
    match field {
        "roughness" => o.roughness = Some(num(value)?),
        "metallic" => o.metallic = Some(num(value)?),
        "albedo" => {
            let parts: Vec<f64> = value.split(',').map(num).collect::<Result<_, _>>()?;
            let [r, g, b] = parts[..] else {
                bail!(CliError::Usage(format!("albedo needs three components in `{spec}`")));
            };
            o.albedo = Some([r, g, b]);
        }
        other => bail!(CliError::Usage(format!("unknown material field `{other}`"))),
    }
    Ok((group.to_string(), o))
}

fn path_name(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn run_edit(cmd: &EditCmd) -> Result<Value> {
    let mut session = open_session(&cmd.scene, &cmd.settings)?;
    for p in &cmd.insert {
        session.insert(&InsertRequest::Manifest(path_name(p)))?;
    }
    for p in &cmd.insert_group {
        session.insert(&InsertRequest::GaussiansFile(path_name(p)))?;
    }
    let mut overrides: Overrides = match &cmd.overrides {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?).with_context(|| format!("parsing {}", p.display()))?,
        None => BTreeMap::new(),
    };
    for s in &cmd.set {
        let (group, o) = parse_set(s)?;
        let merged = overrides.get(&group).cloned().unwrap_or_default().merged(&o);
        overrides.insert(group, merged);
    }
    for (group, o) in &overrides {
        session.patch_material(group, o)?;
    }
    if cmd.env_constant.as_ref().is_some_and(|c| c.len() != 3) {
        bail!(CliError::Usage("--env-constant needs three components r,g,b".into()));
    }
    if cmd.env.is_some() || cmd.env_constant.is_some() || cmd.yaw.is_some() {
        session.set_environment(&EnvironmentRequest {
            name: cmd.env.as_deref().map(path_name),
            constant: cmd.env_constant.as_ref().map(|c| [c[0], c[1], c[2]]),
            yaw: cmd.yaw,
        })?;
    }
    let lut = load_lut(cmd.scene.lut.as_deref())?;
    let (r, secs) = render(&session, &lut)?;
    let mut summary = write_outputs(&r, secs, &session, &cmd.output)?;
    let state = session.summary();
    summary["groups"] = json!(state.groups);
    summary["overrides"] = json!(state.overrides);
    summary["environment"] = json!(state.environment);
    summary["inserts"] = json!(state.inserts);
    Ok(summary)
}

fn miss_name(m: MissReason) -> &'static str {
    match m {
        MissReason::OffScreen => "off_screen",
        MissReason::EmptyPixel => "empty_pixel",
        MissReason::Exhausted => "exhausted",
    }
}

fn plot(img: &mut LdrImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height {
        img.pixels[y as usize * img.width + x as usize] = c;
    }
}

fn line(img: &mut LdrImage, (x0, y0): (f64, f64), (x1, y1): (f64, f64), c: [u8; 3]) {
    let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for k in 0..=n {
        let t = k as f64 / n as f64;
        plot(img, (x0 + (x1 - x0) * t).floor() as i64, (y0 + (y1 - y0) * t).floor() as i64, c);
    }
}

/// Hit mask plus origin-to-hit point pairs for a sparse grid of pixels.
pub fn run_trace(cmd: &TraceCmd) -> Result<Value> {
    if cmd.stride == 0 {
        bail!(CliError::Usage("--stride must be positive".into()));
    }
    let session = open_session(&cmd.scene, &cmd.settings)?;
    let lut = load_lut(cmd.scene.lut.as_deref())?;
    let (r, _) = render(&session, &lut)?;
    let gb = &r.frame.gbuffer;
    let cam = session.camera();
    let settings = session.settings();
    fs::create_dir_all(&cmd.out_dir)?;

    // traced even with --no-ssr
    let depth = surface_depth(gb);
    let view = DepthView::new(gb.width, gb.height, &depth);
    let mut mask = vec![0u8; gb.len()];
    let mut pairs = r.frame.ldr.clone();
    for p in &mut pairs.pixels {
        *p = p.map(|c| c / 3);
    }
    let mut records = Vec::new();
    let (mut traced, mut hits, mut total) = (0usize, 0usize, 0usize);
    for i in 0..gb.len() {
        let Some(t) = trace_pixel(gb, &view, cam, settings, i) else { continue };
        let n = t.samples.len();
        let h = t.samples.iter().flatten().filter(|(_, h)| h.is_hit()).count();
        mask[i] = (255.0 * h as f64 / n as f64).round() as u8;
        traced += 1;
        hits += h;
        total += n;
        let (x, y) = (i % gb.width, i / gb.width);
        if x % cmd.stride != cmd.stride / 2 || y % cmd.stride != cmd.stride / 2 {
            continue;
        }
        let origin = (x as f64 + 0.5, y as f64 + 0.5);
        let mut samples = Vec::new();
        for s in &t.samples {
            match s {
                None => samples.push(json!({"below_horizon": true})),
                Some((_, HitResult::Hit { uv, distance })) => {
                    line(&mut pairs, origin, (uv.x, uv.y), [40, 220, 60]);
                    plot(&mut pairs, uv.x.floor() as i64, uv.y.floor() as i64, [255, 255, 255]);
                    samples.push(json!({"hit": {"uv": [uv.x, uv.y], "distance": distance}}));
                }
                Some((_, HitResult::Miss(m))) => samples.push(json!({"miss": miss_name(*m)})),
            }
        }
        plot(&mut pairs, x as i64, y as i64, if h > 0 { [255, 220, 0] } else { [230, 40, 40] });
        records.push(json!({"pixel": [x, y], "origin": [t.origin.x, t.origin.y, t.origin.z], "samples": samples}));
    }
    let mask_path = cmd.out_dir.join("hit_mask.png");
    let pairs_path = cmd.out_dir.join("pairs.png");
    let json_path = cmd.out_dir.join("pairs.json");
    write_png(&mask_image(gb.width, gb.height, &mask), &mask_path)?;
    write_png(&pairs, &pairs_path)?;
    fs::write(&json_path, serde_json::to_string_pretty(&records)?)?;
    Ok(json!({
        "hit_mask": mask_path,
        "pairs": pairs_path,
        "pairs_json": json_path,
        "traced_pixels": traced,
        "sample_hit_fraction": hits as f64 / total.max(1) as f64,
        "grid_pixels": records.len(),
    }))
}
