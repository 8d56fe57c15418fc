"""Ranking against a reference sort, judge selection, and the bounded
consistency-repair loop."""
import random

import numpy as np
import pytest

from animforge.curation import (
    CandidatePool,
    consistency_repair,
    judge_select_image,
    judge_select_video,
    rank_candidates,
)
from animforge.errors import JudgeFailed, ScoresMissing
from animforge.metrics import MetricReport, coherence, contact_sheet
from animforge.providers import ImageRequest
from animforge.providers.base import FrameSequence, Image
from animforge.providers.mock import (
    MockChatProvider,
    MockImageProvider,
    MockSegmenter,
    hue_bin,
    name_hue_degrees,
)
from animforge.script import CharacterProfile

from conftest import flat_image
from oracles import reference_rank


def report_with_composite(value: float) -> MetricReport:
    return MetricReport(
        distortion_quality=value, subject_consistency=value,
        background_consistency=value, coherence=coherence(value, value),
        text_visual_alignment=0.0,
    )


def image_pool(n=4, seed=0) -> CandidatePool:
    gen = MockImageProvider(resolution=16)
    items = gen.generate_images(ImageRequest(prompt="cast: Tom the cat |", seed=seed), n)
    return CandidatePool(items=tuple(items), provenance="test")


class ScriptedChat:
    """Returns queued replies in order (repeating the last one)."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = 0

    def chat(self, messages):
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


class TestRankCandidates:
    def test_tie_broken_by_lower_index(self):
        pool = CandidatePool(
            items=(0, 1, 2, 3),
            scores=tuple(report_with_composite(v) for v in (0.2, 0.9, 0.9, 0.1)),
        )
        assert rank_candidates(pool, 3) == [1, 2, 0]

    def test_full_rank_is_permutation(self):
        rng = random.Random(11)
        scores = [report_with_composite(rng.random()) for _ in range(10)]
        pool = CandidatePool(items=tuple(range(10)), scores=tuple(scores))
        assert sorted(rank_candidates(pool, 10)) == list(range(10))

    def test_matches_reference_sort_500(self):
        rng = random.Random(12)
        for _ in range(500):
            n = rng.randint(1, 12)
            values = [round(rng.random(), 3) for _ in range(n)]
            pool = CandidatePool(
                items=tuple(range(n)),
                scores=tuple(report_with_composite(v) for v in values),
            )
            k = rng.randint(1, n)
            assert rank_candidates(pool, k) == reference_rank(values, k)

    def test_scores_missing(self):
        with pytest.raises(ScoresMissing):
            rank_candidates(CandidatePool(items=(1, 2)), 1)


class TestJudgeSelectImage:
    def test_parses_mock_verdict(self):
        pool = image_pool(4)
        chat = ScriptedChat("The answer is image 2. Looks right.")
        assert judge_select_image(pool, "a cat", chat) == 1

    def test_singleton_pool_skips_judge(self):
        pool = image_pool(1)
        chat = ScriptedChat("should never be used")
        assert judge_select_image(pool, "a cat", chat) == 0
        assert chat.calls == 0

    def test_garbage_twice_fails(self):
        pool = image_pool(3)
        chat = ScriptedChat("hmm", "still nothing")
        with pytest.raises(JudgeFailed):
            judge_select_image(pool, "a cat", chat)
        assert chat.calls == 2

    def test_retry_once_then_success(self):
        pool = image_pool(3)
        chat = ScriptedChat("no verdict here", "The answer is image 3")
        assert judge_select_image(pool, "a cat", chat) == 2
        assert chat.calls == 2

    def test_real_mock_judge_in_range(self):
        pool = image_pool(4)
        idx = judge_select_image(pool, "a cat", MockChatProvider())
        assert 0 <= idx < 4

    def test_fuzzed_replies_always_in_range_or_error(self):
        rng = random.Random(44)
        pool = image_pool(4)
        for _ in range(200):
            k = rng.randint(-5, 30)
            noise = "".join(rng.choice("abc XY.!?") for _ in range(rng.randint(0, 30)))
            reply = f"{noise} The answer is image {k}." if rng.random() < 0.8 else noise
            chat = ScriptedChat(reply)
            try:
                idx = judge_select_image(pool, "d", chat)
            except JudgeFailed:
                continue
            assert 0 <= idx < 4


class TestJudgeSelectVideo:
    def _sheets(self, count):
        sheets = []
        for i in range(count):
            frames = tuple(flat_image(8, 8, (i * 40 + t * 10, 0, 0)) for t in range(6))
            sheets.append(contact_sheet(FrameSequence(frames=frames, fps=8.0), k=5))
        return sheets

    def test_three_sheets_deterministic(self):
        sheets = self._sheets(3)
        first = judge_select_video(sheets, "action", MockChatProvider())
        second = judge_select_video(sheets, "action", MockChatProvider())
        assert first == second
        assert 0 <= first < 3

    def test_single_sheet_skips_judge(self):
        chat = ScriptedChat("unused")
        assert judge_select_video(self._sheets(1), "action", chat) == 0
        assert chat.calls == 0

    def test_rejects_more_than_three(self):
        with pytest.raises(ValueError):
            judge_select_video(self._sheets(4), "action", MockChatProvider())


def make_scene(characters, wrong: dict | None = None, size=64):
    """Scene canvas with one hue rectangle per character; `wrong` remaps a
    character name to a different painted hue."""
    wrong = wrong or {}
    rng = np.random.default_rng(1)
    from animforge.providers.mock import character_rect, hue_canvas

    arr = hue_canvas(size, size, name_hue_degrees("Garden"), rng)
    for i, name in enumerate(characters):
        painted = wrong.get(name, name)
        y0, y1, x0, x1 = character_rect(size, size, i, len(characters))
        arr[y0:y1, x0:x1] = hue_canvas(y1 - y0, x1 - x0, name_hue_degrees(painted), rng)
    return Image.from_array(arr)


def asset_for(name, size=64):
    gen = MockImageProvider(resolution=size)
    return gen.generate_images(ImageRequest(prompt=f"cast: {name} |", seed=1), 1)[0]


class TestConsistencyRepair:
    def setup_method(self):
        self.segmenter = MockSegmenter()
        self.image_provider = MockImageProvider(resolution=64)
        self.tom = CharacterProfile("Tom the cat", "a neat cat")
        self.max = CharacterProfile("Max the dog", "a big dog")
        self.expected = [
            (self.tom, asset_for("Tom the cat")),
            (self.max, asset_for("Max the dog")),
        ]

    def test_consistent_scene_passes_first_iteration(self):
        scene = make_scene(["Tom the cat", "Max the dog"])
        outcome = consistency_repair(
            scene, self.expected, self.segmenter, self.image_provider,
            MockChatProvider(), max_iters=3,
        )
        assert outcome.passed
        assert outcome.iterations_used == 1
        assert outcome.final_item.content_hash == scene.content_hash
        assert len(outcome.audit_log) == 1  # one judge entry, no replacements

    def test_wrong_hue_repaired_to_name_hue(self):
        # ensure the impostor hue differs from both expected character bins
        impostor = "Zed the newt"
        assert hue_bin(name_hue_degrees(impostor)) not in {
            hue_bin(name_hue_degrees("Tom the cat")),
            hue_bin(name_hue_degrees("Max the dog")),
            hue_bin(name_hue_degrees("Garden")),
        }
        scene = make_scene(
            ["Tom the cat", "Max the dog"], wrong={"Max the dog": impostor}
        )
        outcome = consistency_repair(
            scene, self.expected, self.segmenter, self.image_provider,
            MockChatProvider(), max_iters=3,
        )
        assert outcome.passed
        assert outcome.iterations_used == 2
        replacements = [e for e in outcome.audit_log if e["action"] == "replace"]
        assert len(replacements) == 1
        assert replacements[0]["character"] == "Max the dog"
        # the repainted region now carries Max's hue
        from animforge import _kernels as kernels

        classes = kernels.class_grid(np.asarray(outcome.final_item.pixels))
        max_bin = hue_bin(name_hue_degrees("Max the dog"))
        assert (classes == max_bin).sum() > 0.02 * 64 * 64

    def test_always_failing_judge_hits_budget(self):
        scene = make_scene(["Tom the cat"])
        chat = ScriptedChat("The scene is wrong in every way.")
        outcome = consistency_repair(
            scene, [(self.tom, asset_for("Tom the cat"))], self.segmenter,
            self.image_provider, chat, max_iters=3,
        )
        assert not outcome.passed
        assert outcome.iterations_used == 3
        judges = [e for e in outcome.audit_log if e["action"] == "judge"]
        replacements = [e for e in outcome.audit_log if e["action"] == "replace"]
        assert len(judges) == 3
        assert len(outcome.audit_log) == outcome.iterations_used + len(replacements)

    def test_byte_stable_across_runs(self):
        scene = make_scene(["Tom the cat", "Max the dog"],
                           wrong={"Max the dog": "Zed the newt"})
        outcomes = [
            consistency_repair(
                scene, self.expected, self.segmenter, self.image_provider,
                MockChatProvider(), max_iters=3, seed=5,
            )
            for _ in range(2)
        ]
        assert outcomes[0].final_item.content_hash == outcomes[1].final_item.content_hash
        assert outcomes[0].audit_log == outcomes[1].audit_log


class TestCandidatePool:
    def test_selected_bounds(self):
        with pytest.raises(ValueError):
            CandidatePool(items=(1, 2), selected=5)

    def test_scores_length(self):
        with pytest.raises(ValueError):
            CandidatePool(items=(1, 2), scores=(report_with_composite(0.5),))
