//! Synthetic screens with exact labels: rendered PPM screenshots, view
//! hierarchies, OCR lines, ground-truth Screen-Sentences and patch samples
//! for the proposal classifier.
//!
//! Every screen follows one of up to 26 layout archetypes (its app type).
//! Archetype `k` uses template `k % 3` (list, settings, gallery) and a
//! variant `k / 3` that fixes row count, icon placement and the toolbar.
//! Only strings, icon categories and colors vary between screens of the
//! same archetype.

use std::fs;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use pw2ss_core::label_gen::{graphic_proposals, patch_features, LabelGenConfig, OcrLine, OcrScreen};
use pw2ss_core::pixel::NUM_CATEGORIES;
use pw2ss_core::raster::Rgb;
use pw2ss_core::vh::serialize_vh;
use pw2ss_core::{iou, BBox, PixelWord, Raster, ScreenSentence, ViewHierarchy, ViewNode};
use pw2ss_nn::init::named_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::io::{write_json, write_jsonl};

pub const BASE_WIDTH: f64 = 180.0;
pub const BASE_HEIGHT: f64 = 320.0;
pub const MAX_ARCHETYPES: usize = 26;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_screens: usize,
    /// Number of layout archetypes (= app classes) in use, at most 26.
    pub app_classes: usize,
    pub screen_width: u32,
    pub screen_height: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_screens: 64,
            app_classes: MAX_ARCHETYPES,
            screen_width: 180,
            screen_height: 320,
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_screens >= 1, "n_screens must be at least 1");
        ensure!(
            (1..=MAX_ARCHETYPES).contains(&self.app_classes),
            "app_classes must lie in 1..=26, got {}",
            self.app_classes
        );
        ensure!(
            self.screen_width >= 90 && self.screen_height >= 160,
            "screens must be at least 90x160"
        );
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    List,
    Settings,
    Gallery,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Archetype {
    pub template: Template,
    /// List rows or gallery cells.
    pub items: usize,
    /// Rows whose index has this parity carry a leading icon.
    pub icon_parity: usize,
    pub back_button: bool,
}

pub fn archetype(k: usize) -> Archetype {
    let v = k / 3;
    match k % 3 {
        0 | 1 => Archetype {
            template: if k % 3 == 0 { Template::List } else { Template::Settings },
            items: 2 + v / 2,
            icon_parity: v % 2,
            back_button: false,
        },
        _ => Archetype {
            template: Template::Gallery,
            items: 2 + v % 4,
            icon_parity: 0,
            back_button: v >= 4,
        },
    }
}

const WORDS: [&str; 24] = [
    "wifi", "bluetooth", "display", "sound", "battery", "storage", "privacy", "location", "account", "backup", "language",
    "updates", "photos", "music", "albums", "friends", "messages", "calendar", "notes", "weather", "maps", "news", "camera",
    "recent",
];
const TITLES: [&str; 8] = ["Settings", "Library", "Gallery", "Home", "Profile", "Explore", "Inbox", "Favorites"];
const TEXT_COLOR: Rgb = [60, 60, 60];

/// One rendered fixture screen with its metadata and labels.
#[derive(Clone, Debug)]
pub struct FixtureScreen {
    pub vh: ViewHierarchy,
    pub raster: Raster,
    pub ocr: OcrScreen,
    pub truth: ScreenSentence,
    pub archetype: usize,
}

struct Builder {
    sx: f64,
    sy: f64,
    raster: Raster,
    words: Vec<PixelWord>,
    groups: Vec<usize>,
    ocr: Vec<OcrLine>,
}

impl Builder {
    fn b(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0 * self.sx, y0 * self.sy, x1 * self.sx, y1 * self.sy)
    }

    fn text(&mut self, bounds: BBox, content: &str, group: usize) -> ViewNode {
        let len = (content.chars().count() as f64 * 6.0).min(bounds.width() - 4.0);
        let inner = BBox::new(
            bounds.x_min + 2.0,
            bounds.y_min + 0.3 * bounds.height(),
            bounds.x_min + 2.0 + len,
            bounds.y_max - 0.3 * bounds.height(),
        );
        self.raster.fill_stripes(&inner, TEXT_COLOR, 2);
        self.words.push(
            PixelWord::text(content, bounds)
                .expect("fixture strings are non-empty")
                .with_clickable(Some(false)),
        );
        self.groups.push(group);
        self.ocr.push(OcrLine {
            text: content.to_string(),
            bbox: bounds,
        });
        let mut n = ViewNode::leaf("android.widget.TextView", bounds);
        n.text = Some(content.to_string());
        n
    }

    /// Filled square with a lighter inner mark; returns nothing because
    /// hidden icons have no view node.
    fn icon(&mut self, bounds: BBox, category: usize, group: usize) {
        let c = palette(category);
        self.raster.fill_rect(&bounds, c);
        let inset = bounds.width().min(bounds.height()) * 0.3;
        let inner = BBox::new(
            bounds.x_min + inset,
            bounds.y_min + inset,
            bounds.x_max - inset,
            bounds.y_max - inset,
        );
        self.raster.fill_ellipse(&inner, lighten(c));
        self.words.push(
            PixelWord::graphic(category, bounds)
                .expect("category in range")
                .with_clickable(Some(true)),
        );
        self.groups.push(group);
    }
}

fn palette(category: usize) -> Rgb {
    let h = (category * 37 % 256) as u8;
    [h / 2 + 20, 200 - h / 3, 90 + h / 4]
}

fn lighten(c: Rgb) -> Rgb {
    c.map(|v| v / 2 + 128)
}

fn pick<'a>(rng: &mut impl Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("word lists are non-empty")
}

fn container(class: &str, bounds: BBox, children: Vec<ViewNode>) -> ViewNode {
    let mut n = ViewNode::leaf(class, bounds);
    n.children = children;
    n
}

/// Renders screen `index` of `spec`.
pub fn generate_screen(spec: &FixtureSpec, index: usize) -> FixtureScreen {
    let k = index % spec.app_classes;
    let arch = archetype(k);
    let mut rng = named_rng(spec.seed, &format!("fixture/{index}"));
    let (w, h) = (spec.screen_width, spec.screen_height);
    let mut bld = Builder {
        sx: f64::from(w) / BASE_WIDTH,
        sy: f64::from(h) / BASE_HEIGHT,
        raster: Raster::filled(w, h, pw2ss_core::raster::WHITE),
        words: Vec::new(),
        groups: Vec::new(),
        ocr: Vec::new(),
    };
    let id = format!("s{index:03}");

    // toolbar: optional back button, title, invisible decoy image
    let mut bar = Vec::new();
    if arch.back_button {
        let b = bld.b(3.0, 3.0, 41.0, 37.0);
        let cat = 2 + rng.gen_range(0..2);
        bld.icon(b, cat, 0);
        let mut n = ViewNode::leaf("android.widget.ImageButton", b);
        n.clickable = true;
        bar.push(n);
    }
    let title = pick(&mut rng, &TITLES);
    let tb = bld.b(44.0, 0.0, 140.0, 40.0);
    bar.push(bld.text(tb, title, 0));
    bar.push(ViewNode::leaf("android.widget.ImageView", bld.b(148.0, 6.0, 174.0, 34.0)));
    let mut sections = vec![container("android.widget.Toolbar", bld.b(0.0, 0.0, 180.0, 40.0), bar)];

    match arch.template {
        Template::List | Template::Settings => {
            let mut rows = Vec::new();
            for r in 0..arch.items {
                let y0 = 48.0 + 44.0 * r as f64;
                let group = r + 1;
                let mut kids = Vec::new();
                if r % 2 == arch.icon_parity {
                    let cat = rng.gen_range(0..NUM_CATEGORIES);
                    let b = bld.b(4.0, y0 + 3.0, 44.0, y0 + 37.0);
                    bld.icon(b, cat, group);
                }
                let label = pick(&mut rng, &WORDS);
                let b = bld.b(46.0, y0, 130.0, y0 + 40.0);
                kids.push(bld.text(b, label, group));
                if arch.template == Template::Settings {
                    let b = bld.b(140.0, y0 + 10.0, 172.0, y0 + 30.0);
                    bld.raster.fill_rect(&b, [150, 150, 160]);
                    let knob = bld.b(152.0, y0 + 10.0, 172.0, y0 + 30.0);
                    bld.raster.fill_ellipse(&knob, [40, 110, 220]);
                    bld.words.push(PixelWord::graphic(NUM_CATEGORIES - 1, b).unwrap().with_clickable(Some(true)));
                    bld.groups.push(group);
                    let mut n = ViewNode::leaf("android.widget.Switch", b);
                    n.clickable = true;
                    kids.push(n);
                }
                rows.push(container("android.widget.LinearLayout", bld.b(0.0, y0, 180.0, y0 + 40.0), kids));
            }
            sections.push(container(
                "android.widget.ListView",
                bld.b(0.0, 44.0, 180.0, 320.0),
                rows,
            ));
        }
        Template::Gallery => {
            let mut cells = Vec::new();
            for c in 0..arch.items {
                let (x0, y0) = (4.0 + 88.0 * (c % 2) as f64, 48.0 + 88.0 * (c / 2) as f64);
                let group = c + 1;
                let img = bld.b(x0 + 4.0, y0 + 4.0, x0 + 80.0, y0 + 60.0);
                let color = palette(rng.gen_range(0..NUM_CATEGORIES));
                bld.raster.fill_rect(&img, color);
                let sun = bld.b(x0 + 50.0, y0 + 10.0, x0 + 70.0, y0 + 30.0);
                bld.raster.fill_ellipse(&sun, lighten(color));
                bld.words.push(PixelWord::graphic(18, img).unwrap().with_clickable(Some(true)));
                bld.groups.push(group);
                let mut image = ViewNode::leaf("android.widget.ImageView", img);
                image.clickable = true;
                let caption = pick(&mut rng, &WORDS);
                let cb = bld.b(x0 + 4.0, y0 + 64.0, x0 + 80.0, y0 + 80.0);
                let text = bld.text(cb, caption, group);
                cells.push(container(
                    "android.widget.FrameLayout",
                    bld.b(x0, y0, x0 + 84.0, y0 + 84.0),
                    vec![image, text],
                ));
            }
            sections.push(container(
                "android.widget.GridView",
                bld.b(0.0, 44.0, 180.0, 320.0),
                cells,
            ));
        }
    }

    let mut root = container("android.widget.FrameLayout", bld.b(0.0, 0.0, 180.0, 320.0), sections);
    root.relink(Vec::new());
    let vh = ViewHierarchy {
        screen_id: id.clone(),
        screen_width: w,
        screen_height: h,
        root,
    };

    let mut relations = Vec::new();
    for i in 0..bld.words.len() {
        for j in i + 1..bld.words.len() {
            relations.push((i, j, u8::from(bld.groups[i] == bld.groups[j])));
        }
    }
    let mut truth = ScreenSentence::new(id.clone(), w, h, bld.words);
    truth.app_type = Some(k);
    truth.relations = Some(relations);
    truth.raster_path = Some(format!("screens/{id}.ppm"));
    FixtureScreen {
        vh,
        raster: bld.raster,
        ocr: OcrScreen {
            screen_id: id,
            lines: bld.ocr,
        },
        truth,
        archetype: k,
    }
}

/// Patch-classifier sample: features of one proposal and whether it
/// overlaps a true graphic at IoU >= 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSample {
    pub screen_id: String,
    pub features: Vec<f64>,
    pub label: u8,
}

/// Proposals generated from the true text boxes, labeled against the true graphics.
pub fn patch_samples(screen: &FixtureScreen, cfg: &LabelGenConfig) -> Vec<PatchSample> {
    let texts: Vec<BBox> = screen.truth.pixel_words.iter().filter(|p| p.is_text()).map(|p| p.bbox).collect();
    let graphics: Vec<BBox> = screen.truth.pixel_words.iter().filter(|p| p.is_graphic()).map(|p| p.bbox).collect();
    graphic_proposals(&screen.vh, &texts, cfg)
        .into_iter()
        .filter_map(|b| {
            let f = patch_features(&screen.raster, &b).ok()?;
            let positive = graphics.iter().any(|g| iou(g, &b) >= 0.5);
            Some(PatchSample {
                screen_id: screen.vh.screen_id.clone(),
                features: f.0.to_vec(),
                label: u8::from(positive),
            })
        })
        .collect()
}

pub fn generate(spec: &FixtureSpec) -> Result<Vec<FixtureScreen>> {
    spec.validate()?;
    Ok((0..spec.n_screens).map(|i| generate_screen(spec, i)).collect())
}

/// Writes `vh/<id>.json`, `screens/<id>.ppm`, `ocr.jsonl`, `gt.jsonl`,
/// `patches.jsonl` and `fixture.json` under `out`.
pub fn write_fixtures(spec: &FixtureSpec, out: &Path) -> Result<Vec<FixtureScreen>> {
    let screens = generate(spec)?;
    for sub in ["vh", "screens"] {
        fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.join(sub).display()))?;
    }
    let cfg = LabelGenConfig::default();
    let mut patches = Vec::new();
    for s in &screens {
        let id = &s.vh.screen_id;
        let vh_path = out.join("vh").join(format!("{id}.json"));
        fs::write(&vh_path, serialize_vh(&s.vh) + "\n").with_context(|| format!("writing {}", vh_path.display()))?;
        s.raster
            .save(out.join("screens").join(format!("{id}.ppm")))
            .with_context(|| format!("writing screenshot of {id}"))?;
        patches.extend(patch_samples(s, &cfg));
    }
    write_jsonl(&out.join("ocr.jsonl"), screens.iter().map(|s| &s.ocr))?;
    write_jsonl(&out.join("gt.jsonl"), screens.iter().map(|s| &s.truth))?;
    write_jsonl(&out.join("patches.jsonl"), patches.iter())?;
    write_json(&out.join("fixture.json"), spec)?;
    Ok(screens)
}
