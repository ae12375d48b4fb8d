"""Mix a miniature training corpus and inspect what lands on disk."""

from pathlib import Path
from tempfile import mkdtemp

from specjoint import IbmConfig, StftConfig, build_corpus, mel_bank, read_corpus_stats
from specjoint.features import FeatureKind
from specjoint.synth import write_demo_corpus

root = Path(mkdtemp(prefix="specjoint-demo-"))
clean, noise = write_demo_corpus(
    root / "clean", root / "noise", n_voices=4, voice_duration=0.6, seed=8
)
print(f"wrote {len(clean)} clean voices and {len(noise)} noise beds under {root}")

# Every clean x noise x SNR combination becomes one noisy utterance with
# its feature containers; normalization stats come from the train split.
entries = build_corpus(
    clean,
    noise,
    root / "corpus",
    StftConfig(),
    mel_bank(),
    IbmConfig(),
    snr_grid=(10.0, 0.0),
    val_fraction=0.25,
    test_fraction=0.25,
    seed=8,
)
print(f"manifest: {len(entries)} mixtures")
for entry in entries[:4]:
    print(f"  {entry.utterance_id}  split={entry.split}")

by_split = {s: sum(e.split == s for e in entries) for s in ("train", "val", "test")}
print(f"split sizes: {by_split}")

stats = read_corpus_stats(root / "corpus")
lps_stats = stats[FeatureKind.LPS]
print(f"lps stats over {lps_stats.dims} dims, mean of means {lps_stats.mean.mean():.2f}")

files = sorted(p.name for p in (root / "corpus" / "features").glob("*.sjfm"))
print(f"feature containers: {len(files)} (5 per utterance), e.g. {files[0]}")
