import json

import pytest

from vbfi.boosting import BoostingConfig, train_vgbdt
from vbfi.dataset import TRAITS, load_dataset
from vbfi.synth import SynthSpec, generate_synthetic


def write_dataset_files(tmp_path, images, favorites, traits):
    """Write raw dataset files from plain python structures.

    images: list of (image_id, features, concepts)
    favorites: list of (user_id, image_id)
    traits: list of (user_id, o, c, e, a, n)
    """
    images_path = tmp_path / "images.jsonl"
    with open(images_path, "w") as fh:
        for image_id, features, concepts in images:
            fh.write(json.dumps({"image_id": image_id, "features": features,
                                 "concepts": concepts}) + "\n")
    favorites_path = tmp_path / "favorites.csv"
    with open(favorites_path, "w") as fh:
        fh.write("user_id,image_id\n")
        for user_id, image_id in favorites:
            fh.write(f"{user_id},{image_id}\n")
    traits_path = tmp_path / "traits.csv"
    with open(traits_path, "w") as fh:
        fh.write("user_id," + ",".join(TRAITS) + "\n")
        for row in traits:
            fh.write(",".join(str(v) for v in row) + "\n")
    return images_path, favorites_path, traits_path


@pytest.fixture
def tiny_dataset(tmp_path):
    """One image, one user, d=82, all traits zero."""
    paths = write_dataset_files(
        tmp_path,
        images=[("img1", [0.5] * 82, ["lakeside"])],
        favorites=[("u1", "img1")],
        traits=[("u1", 0.0, 0.0, 0.0, 0.0, 0.0)],
    )
    return load_dataset(*paths)


@pytest.fixture(scope="session")
def small_planted():
    """Small planted dataset shared by the slower integration tests."""
    spec = SynthSpec(seed=11, num_users=32, num_views=6, feature_dim=6,
                     informative_views=(0, 1), step_amplitudes=(1.0, 0.7),
                     levels=4, noise_std=0.4, images_per_concept=2)
    return spec, *generate_synthetic(spec)


@pytest.fixture(scope="session")
def small_models(small_planted):
    spec, ds, vm, labels = small_planted
    X, order = vm.matrix()
    config = BoostingConfig(n_rounds=3, n_leaves=4)
    models = {t: train_vgbdt(X, labels[t], vm.num_views, config,
                             view_names=list(vm.concept_order), trait=t)
              for t in TRAITS}
    return models
