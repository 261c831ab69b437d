//! Deterministic synthetic datasets.
//!
//! Everything is driven by a single ChaCha8 stream seeded from the spec, so
//! the same spec always yields the same library, queries and truth.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{IsomerGroup, Truth};
use crate::spectrum::{AnalyteRecord, Peak, Polarity, ReferenceLibrary, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFixtureSpec {
    pub n_analytes: usize,
    pub spectra_per_analyte: usize,
    /// Inclusive fragment peak count range.
    pub peak_count: (usize, usize),
    /// Standard deviation of fragment m/z jitter, Thomson.
    pub mz_jitter: f64,
    /// Relative intensity jitter; each intensity is scaled by `1 + U(-f, f)`.
    pub intensity_jitter: f64,
    pub dropout: f64,
    /// Standard deviation of the query precursor shift, ppm.
    pub precursor_ppm_sigma: f64,
    /// Intensity jitter between replicate reference spectra of one analyte.
    pub replicate_jitter: f64,
    pub isomer_groups: usize,
    pub isomer_group_size: usize,
    /// Fragment peaks replaced per isomer relative to its group's template.
    pub isomer_differing_peaks: usize,
    /// Fraction of analytes queried but left out of the library.
    pub withheld_fraction: f64,
    pub queries_per_analyte: usize,
    /// Queries are spread round-robin over this many sample files.
    pub n_files: usize,
    pub seed: u64,
}

impl Default for SyntheticFixtureSpec {
    fn default() -> Self {
        SyntheticFixtureSpec {
            n_analytes: 100,
            spectra_per_analyte: 3,
            peak_count: (8, 20),
            mz_jitter: 0.002,
            intensity_jitter: 0.1,
            dropout: 0.1,
            precursor_ppm_sigma: 1.0,
            replicate_jitter: 0.05,
            isomer_groups: 0,
            isomer_group_size: 2,
            isomer_differing_peaks: 2,
            withheld_fraction: 0.0,
            queries_per_analyte: 1,
            n_files: 1,
            seed: 0,
        }
    }
}

impl SyntheticFixtureSpec {
    /// Same layout with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.mz_jitter = 0.0;
        self.intensity_jitter = 0.0;
        self.dropout = 0.0;
        self.precursor_ppm_sigma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_analytes", self.n_analytes),
            ("spectra_per_analyte", self.spectra_per_analyte),
            ("queries_per_analyte", self.queries_per_analyte),
            ("n_files", self.n_files),
            ("peak_count.0", self.peak_count.0),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.peak_count.0 > self.peak_count.1 {
            return Err(Error::invalid("peak_count range is empty"));
        }
        for (name, p) in [
            ("dropout", self.dropout),
            ("withheld_fraction", self.withheld_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, v) in [
            ("mz_jitter", self.mz_jitter),
            ("intensity_jitter", self.intensity_jitter),
            ("precursor_ppm_sigma", self.precursor_ppm_sigma),
            ("replicate_jitter", self.replicate_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.intensity_jitter >= 1.0 || self.replicate_jitter >= 1.0 {
            return Err(Error::invalid("intensity jitter must be below 1"));
        }
        if self.isomer_groups > 0 {
            if self.isomer_group_size < 2 {
                return Err(Error::invalid("isomer groups need at least two members"));
            }
            if self.isomer_groups * self.isomer_group_size > self.n_analytes {
                return Err(Error::invalid(
                    "isomer groups need more analytes than available",
                ));
            }
            if self.isomer_differing_peaks == 0 || self.isomer_differing_peaks > self.peak_count.0 {
                return Err(Error::invalid(
                    "isomer_differing_peaks must lie in [1, min peak count]",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub library: ReferenceLibrary,
    pub queries: Vec<Spectrum>,
    pub truth: Truth,
    pub isomer_groups: Vec<IsomerGroup>,
    /// Analytes queried but absent from the library.
    pub withheld: BTreeSet<String>,
    pub warnings: Vec<String>,
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

fn random_key(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let key: String = (0..14)
            .map(|_| rng.random_range(b'A'..=b'Z') as char)
            .collect();
        if used.insert(key.clone()) {
            return key;
        }
    }
}

/// Random heavy-atom tree (plus an optional ring closure) written as SMILES.
pub fn random_smiles(rng: &mut ChaCha8Rng, max_atoms: usize) -> String {
    let n = rng.random_range(2..=max_atoms.max(2));
    let elements: Vec<&str> = (0..n)
        .map(|_| match rng.random_range(0..20) {
            0..=13 => "C",
            14..=16 => "N",
            _ => "O",
        })
        .collect();
    let mut children: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.random_range(i.saturating_sub(3)..i);
        let bond = if elements[i] == "C" && elements[parent] == "C" && rng.random_bool(0.15) {
            "="
        } else {
            ""
        };
        children[parent].push((i, bond));
    }
    let mut ring = vec![false; n];
    if n >= 5 && rng.random_bool(0.3) {
        // Close a ring between the root and the last atom if not bonded.
        let last = n - 1;
        if !children[0].iter().any(|(c, _)| *c == last) {
            ring[0] = true;
            ring[last] = true;
        }
    }
    fn write(i: usize, el: &[&str], ch: &[Vec<(usize, &str)>], ring: &[bool], out: &mut String) {
        out.push_str(el[i]);
        if ring[i] {
            out.push('1');
        }
        let kids = &ch[i];
        for (k, (c, bond)) in kids.iter().enumerate() {
            let last = k + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond);
            write(*c, el, ch, ring, out);
            if !last {
                out.push(')');
            }
        }
    }
    let mut out = String::new();
    write(0, &elements, &children, &ring, &mut out);
    out
}

fn random_fragment(rng: &mut ChaCha8Rng, precursor: f64) -> Peak {
    let mz = round_to(rng.random_range(50.0..precursor - 1.0), 4);
    let u: f64 = rng.random_range(0.05..1.0);
    Peak::new(mz, round_to(1000.0 * u * u, 2))
}

fn random_pattern(rng: &mut ChaCha8Rng, precursor: f64, peaks: (usize, usize)) -> Vec<Peak> {
    let n = rng.random_range(peaks.0..=peaks.1);
    (0..n).map(|_| random_fragment(rng, precursor)).collect()
}

fn jitter_intensities(rng: &mut ChaCha8Rng, peaks: &[Peak], jitter: f64) -> Vec<Peak> {
    peaks
        .iter()
        .map(|p| {
            let f = if jitter > 0.0 {
                1.0 + rng.random_range(-jitter..=jitter)
            } else {
                1.0
            };
            Peak::new(p.mz, round_to(p.intensity * f, 2))
        })
        .collect()
}

struct Template {
    key: String,
    precursor: f64,
    replicates: Vec<Vec<Peak>>,
}

/// Library plus noisy queries; see [`SyntheticFixtureSpec`].
pub fn generate_fixture(spec: &SyntheticFixtureSpec) -> Result<Fixture> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used = BTreeSet::new();

    // Base fragment patterns; isomer groups share precursor and template.
    let mut bases: Vec<(String, f64, Vec<Peak>)> = Vec::with_capacity(spec.n_analytes);
    let mut isomer_groups = Vec::new();
    for g in 0..spec.isomer_groups {
        let precursor = round_to(rng.random_range(150.0..900.0), 4);
        let template = random_pattern(&mut rng, precursor, spec.peak_count);
        let mut keys = Vec::new();
        for _ in 0..spec.isomer_group_size {
            let mut pattern = template.clone();
            let mut slots: Vec<usize> = (0..pattern.len()).collect();
            slots.shuffle(&mut rng);
            for &s in slots.iter().take(spec.isomer_differing_peaks) {
                pattern[s] = random_fragment(&mut rng, precursor);
            }
            let key = random_key(&mut rng, &mut used);
            keys.push(key.clone());
            bases.push((key, precursor, pattern));
        }
        isomer_groups.push(IsomerGroup {
            group_id: format!("iso{g:03}"),
            analyte_keys: keys,
        });
    }
    while bases.len() < spec.n_analytes {
        let precursor = round_to(rng.random_range(150.0..900.0), 4);
        let pattern = random_pattern(&mut rng, precursor, spec.peak_count);
        bases.push((random_key(&mut rng, &mut used), precursor, pattern));
    }

    let templates: Vec<Template> = bases
        .into_iter()
        .map(|(key, precursor, pattern)| {
            let replicates = (0..spec.spectra_per_analyte)
                .map(|j| {
                    if j == 0 {
                        pattern.clone()
                    } else {
                        jitter_intensities(&mut rng, &pattern, spec.replicate_jitter)
                    }
                })
                .collect();
            Template {
                key,
                precursor,
                replicates,
            }
        })
        .collect();

    let n_withheld = (spec.withheld_fraction * spec.n_analytes as f64).round() as usize;
    let mut order: Vec<usize> = (0..templates.len()).collect();
    order.shuffle(&mut rng);
    let withheld: BTreeSet<String> = order[..n_withheld]
        .iter()
        .map(|&i| templates[i].key.clone())
        .collect();

    let mut library = ReferenceLibrary::new();
    for (i, t) in templates.iter().enumerate() {
        let smiles = random_smiles(&mut rng, 10);
        if withheld.contains(&t.key) {
            continue;
        }
        library.add_analyte(AnalyteRecord {
            key2d: t.key.clone(),
            inchikey_full: Some(format!("{}-UHFFFAOYSA-N", t.key)),
            smiles,
            registry_id: i as u64 + 1,
            name: format!("analyte_{i}"),
        })?;
        for (j, peaks) in t.replicates.iter().enumerate() {
            let s = Spectrum::new(
                format!("{}_r{j}", t.key),
                t.precursor,
                Polarity::Positive,
                peaks.clone(),
            )?
            .with_analyte(t.key.clone());
            library.add_spectrum(s)?;
        }
    }

    let mz_noise = Normal::new(0.0, spec.mz_jitter.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let ppm_noise =
        Normal::new(0.0, spec.precursor_ppm_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut queries = Vec::new();
    let mut truth = Truth::new();
    let mut warnings = Vec::new();
    let mut q = 0usize;
    for t in &templates {
        for r in 0..spec.queries_per_analyte {
            let id = format!("q{q:06}");
            let file = format!("file_{:03}", q % spec.n_files);
            q += 1;
            let source = &t.replicates[r % t.replicates.len()];
            let mut peaks = Vec::with_capacity(source.len());
            for p in source {
                if spec.dropout > 0.0 && rng.random::<f64>() < spec.dropout {
                    continue;
                }
                let mut mz = p.mz;
                if spec.mz_jitter > 0.0 {
                    mz = round_to(mz + mz_noise.sample(&mut rng), 5);
                }
                let mut intensity = p.intensity;
                if spec.intensity_jitter > 0.0 {
                    intensity = round_to(
                        intensity
                            * (1.0
                                + rng.random_range(-spec.intensity_jitter..=spec.intensity_jitter)),
                        2,
                    );
                }
                peaks.push(Peak::new(mz, intensity));
            }
            if !peaks.iter().any(|p| p.intensity > 0.0) {
                let msg = format!("query {id} of analyte {} lost every peak; skipped", t.key);
                log::warn!("{msg}");
                warnings.push(msg);
                continue;
            }
            let precursor = if spec.precursor_ppm_sigma > 0.0 {
                round_to(t.precursor * (1.0 + ppm_noise.sample(&mut rng) * 1e-6), 6)
            } else {
                t.precursor
            };
            let s = Spectrum::new(id.clone(), precursor, Polarity::Positive, peaks)?
                .with_sample(file)
                .with_analyte(t.key.clone());
            truth.insert(id, t.key.clone());
            queries.push(s);
        }
    }

    Ok(Fixture {
        library,
        queries,
        truth,
        isomer_groups,
        withheld,
        warnings,
    })
}

type DilutionAnalyte = (String, f64, Vec<Peak>, f64, Vec<f64>);

/// Nested dilution series: analytes disappear and fragment peaks drop out
/// monotonically with the level, so anything seen at a level is also seen
/// at every lower one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DilutionFixtureSpec {
    pub n_ground_truth: usize,
    /// Library analytes outside the ground truth; contaminant queries hit them.
    pub n_decoys: usize,
    pub contaminants_per_file: usize,
    pub dilutions: Vec<u32>,
    pub files_per_dilution: usize,
    pub peak_count: (usize, usize),
    /// Fraction of ground-truth analytes lost per level.
    pub presence_loss_per_level: f64,
    /// Peak dropout probability added per level.
    pub dropout_per_level: f64,
    pub seed: u64,
}

impl Default for DilutionFixtureSpec {
    fn default() -> Self {
        DilutionFixtureSpec {
            n_ground_truth: 60,
            n_decoys: 40,
            contaminants_per_file: 15,
            dilutions: vec![10, 20, 30, 40, 80, 120, 160],
            files_per_dilution: 2,
            peak_count: (10, 16),
            presence_loss_per_level: 0.08,
            dropout_per_level: 0.07,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DilutionFixture {
    pub library: ReferenceLibrary,
    pub queries: Vec<Spectrum>,
    /// `sample -> {"dilution": value}`.
    pub sample_metadata: BTreeMap<String, BTreeMap<String, String>>,
    pub ground_truth: BTreeSet<String>,
}

pub fn generate_dilution_fixture(spec: &DilutionFixtureSpec) -> Result<DilutionFixture> {
    let levels = spec.dilutions.len();
    if levels == 0 || spec.files_per_dilution == 0 || spec.n_ground_truth == 0 {
        return Err(Error::invalid(
            "dilution fixture needs levels, files and analytes",
        ));
    }
    if spec.peak_count.0 == 0 || spec.peak_count.0 > spec.peak_count.1 {
        return Err(Error::invalid("peak_count range is empty"));
    }
    let last = (levels - 1) as f64;
    if spec.presence_loss_per_level * last >= 1.0 || spec.dropout_per_level * last >= 1.0 {
        return Err(Error::invalid(
            "losses per level must stay below 1 at the last level",
        ));
    }
    if spec.contaminants_per_file > 0 && spec.n_decoys == 0 {
        return Err(Error::invalid("contaminants need decoy analytes"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut used = BTreeSet::new();
    let mut library = ReferenceLibrary::new();
    // (key, precursor, peaks, presence draw, per-peak keep draws)
    let mut analytes: Vec<DilutionAnalyte> = Vec::new();
    for i in 0..spec.n_ground_truth + spec.n_decoys {
        let key = random_key(&mut rng, &mut used);
        let precursor = round_to(rng.random_range(150.0..900.0), 4);
        let peaks = random_pattern(&mut rng, precursor, spec.peak_count);
        let presence: f64 = rng.random();
        let keep: Vec<f64> = peaks.iter().map(|_| rng.random()).collect();
        library.add_analyte(AnalyteRecord {
            key2d: key.clone(),
            inchikey_full: Some(format!("{key}-UHFFFAOYSA-N")),
            smiles: random_smiles(&mut rng, 10),
            registry_id: i as u64 + 1,
            name: format!("analyte_{i}"),
        })?;
        library.add_spectrum(
            Spectrum::new(
                format!("{key}_r0"),
                precursor,
                Polarity::Positive,
                peaks.clone(),
            )?
            .with_analyte(key.clone()),
        )?;
        analytes.push((key, precursor, peaks, presence, keep));
    }
    let (truth_part, decoys) = analytes.split_at(spec.n_ground_truth);
    let ground_truth = truth_part.iter().map(|a| a.0.clone()).collect();

    let mut queries = Vec::new();
    let mut sample_metadata = BTreeMap::new();
    for (level, dilution) in spec.dilutions.iter().enumerate() {
        let loss = level as f64 * spec.presence_loss_per_level;
        let dropout = level as f64 * spec.dropout_per_level;
        for rep in 0..spec.files_per_dilution {
            let sample = format!("d{dilution:03}_r{rep}");
            sample_metadata.insert(
                sample.clone(),
                BTreeMap::from([("dilution".to_string(), dilution.to_string())]),
            );
            for (key, precursor, peaks, presence, keep) in truth_part {
                if *presence < loss {
                    continue;
                }
                let kept: Vec<Peak> = peaks
                    .iter()
                    .zip(keep)
                    .filter(|(_, &k)| k >= dropout)
                    .map(|(p, _)| *p)
                    .collect();
                if kept.is_empty() {
                    continue;
                }
                queries.push(
                    Spectrum::new(
                        format!("{sample}_{key}"),
                        *precursor,
                        Polarity::Positive,
                        kept,
                    )?
                    .with_sample(sample.clone()),
                );
            }
            for c in 0..spec.contaminants_per_file {
                let (_, precursor, peaks, _, _) = &decoys[rng.random_range(0..decoys.len())];
                let mut mixed: Vec<Peak> = peaks
                    .choose_multiple(&mut rng, 2)
                    .map(|p| Peak::new(p.mz, p.intensity * 0.5))
                    .collect();
                mixed.extend((0..6).map(|_| random_fragment(&mut rng, *precursor)));
                queries.push(
                    Spectrum::new(
                        format!("{sample}_c{c:03}"),
                        *precursor,
                        Polarity::Positive,
                        mixed,
                    )?
                    .with_sample(sample.clone()),
                );
            }
        }
    }
    Ok(DilutionFixture {
        library,
        queries,
        sample_metadata,
        ground_truth,
    })
}
