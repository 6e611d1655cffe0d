import pytest

from enexmatch import (
    CMCCurve,
    DatasetManifest,
    ManifestEntry,
    ManifestError,
    SyntheticConfig,
    UnknownLabelError,
    cmc_csv,
    emit_report,
    evaluate,
    generate_synthetic,
    ingest,
    load_image,
    load_sample,
    parse_report,
    probe_bundles,
    read_manifest,
    write_manifest,
)

SMALL = SyntheticConfig(
    subjects=4,
    samples_per_subject=4,
    metric_samples=2,
    probes_per_subject=1,
    seed=11,
)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    return generate_synthetic(SMALL, out)


@pytest.fixture(scope="module")
def two_camera_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("twocam")
    config = SyntheticConfig(
        subjects=3,
        samples_per_subject=3,
        metric_samples=2,
        probes_per_subject=1,
        cameras=2,
        seed=12,
    )
    return generate_synthetic(config, out)


class TestManifestIO:
    def test_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            root=tmp_path,
            entries=(
                ManifestEntry(
                    label="s001",
                    role="gallery",
                    image="images/a.ppm",
                    mask="masks/a.pgm",
                    bbox_height=150,
                    bbox_width=30,
                    entrance_ref_height=200,
                    camera_id="c1",
                    view="front",
                ),
                ManifestEntry(label="s001", role="probe", image="images/b.ppm"),
            ),
        )
        path = tmp_path / "manifest.csv"
        write_manifest(manifest, path)
        back = read_manifest(path)
        assert back.entries == manifest.entries
        assert back.root == tmp_path

    def test_blank_optionals_read_as_none(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "label,role,image,mask,bbox_height,bbox_width,"
            "entrance_ref_height,camera_id,view\n"
            "s001,gallery,images/a.ppm,,,,,c1,front\n"
        )
        entry = read_manifest(path).entries[0]
        assert entry.mask is None
        assert entry.bbox_height is None
        assert entry.entrance_ref_height is None

    def test_bad_header(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text("who,what\n")
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_bad_role(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "label,role,image,mask,bbox_height,bbox_width,"
            "entrance_ref_height,camera_id,view\n"
            "s001,witness,images/a.ppm,,,,,c1,front\n"
        )
        with pytest.raises(ManifestError, match="line 2"):
            read_manifest(path)

    def test_bad_view(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "label,role,image,mask,bbox_height,bbox_width,"
            "entrance_ref_height,camera_id,view\n"
            "s001,gallery,images/a.ppm,,,,,c1,sideways\n"
        )
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_bad_integer(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "label,role,image,mask,bbox_height,bbox_width,"
            "entrance_ref_height,camera_id,view\n"
            "s001,gallery,images/a.ppm,,tall,,,c1,front\n"
        )
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_short_row(self, tmp_path):
        path = tmp_path / "manifest.csv"
        path.write_text(
            "label,role,image,mask,bbox_height,bbox_width,"
            "entrance_ref_height,camera_id,view\n"
            "s001,gallery\n"
        )
        with pytest.raises(ManifestError):
            read_manifest(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            read_manifest(tmp_path / "nope.csv")

    def test_missing_image_fails_at_load(self, tmp_path):
        entry = ManifestEntry(label="s001", role="probe", image="images/gone.ppm")
        with pytest.raises(ManifestError):
            load_sample(entry, tmp_path)


class TestGenerator:
    def test_row_counts(self, small_dataset):
        per_subject = SMALL.samples_per_subject + SMALL.probes_per_subject
        assert len(small_dataset.entries) == SMALL.subjects * per_subject
        roles = [e.role for e in small_dataset.entries]
        assert roles.count("gallery") == SMALL.subjects * SMALL.samples_per_subject
        assert roles.count("probe") == SMALL.subjects * SMALL.probes_per_subject

    def test_files_exist_and_parse(self, small_dataset):
        for entry in small_dataset.entries:
            image = load_image(small_dataset.root / entry.image)
            assert image.height == SMALL.image_height
            assert image.width == SMALL.image_width

    def test_metric_rows(self, small_dataset):
        for label in sorted({e.label for e in small_dataset.entries}):
            rows = [
                e
                for e in small_dataset.entries
                if e.label == label and e.role == "gallery"
            ]
            with_metrics = [e for e in rows if e.mask is not None]
            assert len(with_metrics) == SMALL.metric_samples
            for e in with_metrics:
                assert e.bbox_height is not None
                assert e.bbox_width is not None
                assert e.entrance_ref_height == SMALL.entrance_ref_height
        probes = [e for e in small_dataset.entries if e.role == "probe"]
        assert all(e.mask is not None for e in probes)

    def test_determinism(self, tmp_path):
        config = SyntheticConfig(
            subjects=2,
            samples_per_subject=2,
            metric_samples=1,
            pixel_noise=4.0,
            chroma_noise=2.0,
            height_noise=1.0,
            seed=77,
        )
        first = generate_synthetic(config, tmp_path / "a")
        second = generate_synthetic(config, tmp_path / "b")
        assert [e.image for e in first.entries] == [e.image for e in second.entries]
        assert (tmp_path / "a" / "manifest.csv").read_bytes() == (
            tmp_path / "b" / "manifest.csv"
        ).read_bytes()
        for entry in first.entries:
            a = (tmp_path / "a" / entry.image).read_bytes()
            b = (tmp_path / "b" / entry.image).read_bytes()
            assert a == b

    def test_seed_changes_output(self, tmp_path):
        base = SyntheticConfig(subjects=2, samples_per_subject=1, metric_samples=1, seed=1)
        other = SyntheticConfig(subjects=2, samples_per_subject=1, metric_samples=1, seed=2)
        a = generate_synthetic(base, tmp_path / "a")
        b = generate_synthetic(other, tmp_path / "b")
        image = a.entries[0].image
        assert (tmp_path / "a" / image).read_bytes() != (
            tmp_path / "b" / image
        ).read_bytes()

    def test_zero_noise_repeats_frames_exactly(self, small_dataset):
        # Without noise every front-view frame of a subject is identical.
        rows = [
            e
            for e in small_dataset.entries
            if e.label == "s001" and e.role == "gallery"
        ]
        blobs = {(small_dataset.root / e.image).read_bytes() for e in rows}
        assert len(blobs) == 1

    def test_subjects_are_distinct(self, small_dataset):
        firsts = {}
        for entry in small_dataset.entries:
            if entry.role == "gallery" and entry.label not in firsts:
                firsts[entry.label] = (small_dataset.root / entry.image).read_bytes()
        blobs = list(firsts.values())
        assert len(set(blobs)) == len(blobs)

    def test_two_cameras_pair_rows(self, two_camera_dataset):
        cameras = {e.camera_id for e in two_camera_dataset.entries}
        assert cameras == {"c1", "c2"}
        c2_rows = [e for e in two_camera_dataset.entries if e.camera_id == "c2"]
        assert all(e.mask is None and e.bbox_height is None for e in c2_rows)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=1)
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=2, metric_samples=9, samples_per_subject=3)
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=2, clothing_change_prob=1.5)
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=2, pixel_noise=-1.0)
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=2, cameras=3)
        with pytest.raises(ValueError):
            SyntheticConfig(subjects=2, image_height=4)


class TestIngest:
    def test_gallery_and_probe_split(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        assert sorted(gallery_map) == ["s001", "s002", "s003", "s004"]
        assert all(
            len(bundles) == SMALL.samples_per_subject
            for bundles in gallery_map.values()
        )
        assert len(probes) == SMALL.subjects
        assert sorted(p.label for p in probes) == sorted(gallery_map)

    def test_bundle_feature_shapes(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        bundle = gallery_map["s001"][0]
        assert bundle.feature_vector("clothing").shape == (96,)
        assert bundle.feature_vector("complexion").shape == (2,)
        metric_count = sum(
            1 for b in gallery_map["s001"] if b.feature_vector("height") is not None
        )
        assert metric_count == SMALL.metric_samples
        assert all(p.feature_vector("height") is not None for p in probes)
        assert all(p.feature_vector("build") is not None for p in probes)

    def test_probe_bundles_shortcut(self, small_dataset):
        probes = probe_bundles(small_dataset)
        assert len(probes) == SMALL.subjects
        assert all(p.label for p in probes)

    def test_manifest_path_accepted(self, small_dataset):
        gallery_map, probes = ingest(small_dataset.root / "manifest.csv")
        assert len(probes) == SMALL.subjects
        assert len(gallery_map) == SMALL.subjects

    def test_two_camera_fusion_widens_features(self, two_camera_dataset):
        gallery_map, probes = ingest(two_camera_dataset)
        bundle = probes[0]
        assert bundle.feature_vector("clothing").shape == (192,)
        assert bundle.feature_vector("complexion").shape == (4,)
        # Metrics exist once per observation, from the entrance camera.
        assert bundle.feature_vector("height").shape == (1,)

    def test_camera_count_mismatch(self, two_camera_dataset, tmp_path):
        kept = [
            e
            for i, e in enumerate(two_camera_dataset.entries)
            if not (e.camera_id == "c2" and e.role == "gallery" and i < 4)
        ]
        broken = DatasetManifest(
            root=two_camera_dataset.root, entries=tuple(kept)
        )
        with pytest.raises(ManifestError, match="cameras disagree"):
            ingest(broken)

    def test_open_set_probe_rejected(self, small_dataset):
        extra = ManifestEntry(
            label="intruder",
            role="probe",
            image=small_dataset.entries[0].image,
        )
        open_set = DatasetManifest(
            root=small_dataset.root,
            entries=small_dataset.entries + (extra,),
        )
        with pytest.raises(ManifestError, match="intruder"):
            ingest(open_set)

    def test_back_view_probe_has_no_complexion(self, tmp_path):
        config = SyntheticConfig(
            subjects=2,
            samples_per_subject=2,
            metric_samples=1,
            back_view_prob=1.0,
            seed=5,
        )
        manifest = generate_synthetic(config, tmp_path)
        _, probes = ingest(manifest)
        assert all(p.feature_vector("complexion") is None for p in probes)
        assert all(p.feature_vector("clothing") is not None for p in probes)


class TestCMC:
    def test_accuracy_lookup(self):
        curve = CMCCurve((0.25, 0.5, 0.75, 1.0))
        assert curve.accuracy(1) == 0.25
        assert curve.accuracy(3) == 0.75
        assert curve.accuracy(4) == 1.0
        assert curve.accuracy(99) == 1.0

    def test_rank_below_one(self):
        with pytest.raises(ValueError):
            CMCCurve((1.0,)).accuracy(0)

    def test_validation(self):
        with pytest.raises(ValueError):
            CMCCurve(())
        with pytest.raises(ValueError):
            CMCCurve((0.5, 0.4, 1.0))
        with pytest.raises(ValueError):
            CMCCurve((0.5, 1.2))
        with pytest.raises(ValueError):
            CMCCurve((0.2, 0.9))

    def test_perfect_curve(self):
        curve = CMCCurve((1.0, 1.0))
        assert curve.accuracy(1) == 1.0


class TestEvaluate:
    def test_clean_dataset_is_solved(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        result = evaluate(gallery_map, probes)
        assert result.n == SMALL.subjects
        assert result.probe_count == SMALL.subjects
        assert result.rank_accuracy[1] == 1.0
        assert result.cmc.accuracies[-1] == 1.0

    def test_feature_subset(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        result = evaluate(gallery_map, probes, features=("clothing",))
        assert set(result.rank_accuracy) == {1, 5, 10}
        assert result.rank_accuracy[1] == 1.0

    def test_custom_ranks(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        result = evaluate(gallery_map, probes, ks=(1, 2))
        assert set(result.rank_accuracy) == {1, 2}

    def test_unknown_probe_label(self, small_dataset):
        gallery_map, probes = ingest(small_dataset)
        renamed = [p.restrict(p.available_features()) for p in probes]
        stranger = type(probes[0])(
            clothing=probes[0].clothing,
            height=probes[0].height,
            build=probes[0].build,
            complexion=probes[0].complexion,
            label="stranger",
        )
        with pytest.raises(UnknownLabelError):
            evaluate(gallery_map, list(renamed[:1]) + [stranger])

    def test_no_probes(self, small_dataset):
        gallery_map, _ = ingest(small_dataset)
        with pytest.raises(ValueError):
            evaluate(gallery_map, [])

    def test_clothing_change_hurts_clothing_more_than_ensemble(self, tmp_path):
        config = SyntheticConfig(
            subjects=8,
            samples_per_subject=6,
            metric_samples=3,
            probes_per_subject=2,
            clothing_change_prob=1.0,
            pixel_noise=4.0,
            chroma_noise=1.0,
            height_noise=1.0,
            build_noise=0.5,
            seed=31,
        )
        gallery_map, probes = ingest(generate_synthetic(config, tmp_path))
        alone = evaluate(gallery_map, probes, features=("clothing",))
        ensemble = evaluate(gallery_map, probes)
        assert ensemble.rank_accuracy[1] >= alone.rank_accuracy[1]
        assert ensemble.rank_accuracy[5] >= alone.rank_accuracy[5]


class TestReports:
    def test_emit_layout(self):
        text = emit_report(
            [("all-features", {1: 0.5, 5: 0.75, 10: 1.0})], ks=(1, 5, 10)
        )
        lines = text.splitlines()
        assert lines[0] == "Rank                    1      5     10"
        assert lines[1] == "all-features        0.500  0.750  1.000"
        assert text.endswith("\n")

    def test_three_decimal_cells(self):
        text = emit_report([("proposed", {1: 0.231, 5: 0.489, 10: 0.867})])
        assert "0.231  0.489  0.867" in text
        assert text.splitlines()[1] == "proposed            0.231  0.489  0.867"

    def test_long_names_widen_column(self):
        name = "clothing+height+build+complexion"
        text = emit_report([(name, {1: 1.0})], ks=(1,))
        lines = text.splitlines()
        assert lines[1].startswith(name + "  ")
        assert len(lines[0].split()) == 2

    def test_round_trip(self):
        rows = [
            ("clothing", {1: 0.231, 5: 0.489, 10: 0.867}),
            ("all-features", {1: 0.412, 5: 0.77, 10: 0.95}),
        ]
        parsed = parse_report(emit_report(rows))
        assert parsed[0][0] == "clothing"
        assert parsed[0][1] == {1: 0.231, 5: 0.489, 10: 0.867}
        assert parsed[1][1][5] == pytest.approx(0.77)

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_report("")
        with pytest.raises(ValueError):
            parse_report("not a report\n")

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            emit_report([])

    def test_cmc_csv(self):
        assert cmc_csv(CMCCurve((0.5, 1.0))) == "k,accuracy\n1,0.500000\n2,1.000000\n"
