"""Write a filter manifest whose fused features have prescribed cosines with
their emotion embeddings, then run the filter over it.

    python3 scripts/make_boundary_manifest.py manifests/ --cosines 0.79,0.8,0.81
"""

import argparse
from pathlib import Path

from striplab.fixtures import prescribed_cosine_samples
from striplab.fusion import FusionParams, filter_samples, write_manifest


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", type=Path)
    ap.add_argument("--cosines", default="0.79,0.8,0.81,0.5,1.0")
    ap.add_argument("--tau", type=float, default=0.8)
    args = ap.parse_args()
    cosines = [float(c) for c in args.cosines.split(",")]
    samples = prescribed_cosine_samples(cosines)
    path = write_manifest(args.root, samples)
    print(f"# {path}")
    res = filter_samples(samples, FusionParams.identity(samples[0].audio_feature.shape[0]),
                         args.tau)
    for s, c in zip(samples, cosines):
        print(f"{s.id} cos={c:g} {'kept' if s.id in res.retained else 'dropped'}")
    print(res.summary())


if __name__ == "__main__":
    main()
