from __future__ import annotations

import pytest

from arcmem.model import ArcType, EpisodeKey, NarrativeArc, Progression, derive_id, validate_arc
from arcmem.pipeline import (
    ArcDraft,
    OrderingError,
    PipelineContext,
    agent1_identify_existing,
    agent4_optimize_season,
    agent5_deduplicate,
    agent6_enhance_details,
    agent7_verify_progressions,
    agent8_verify_roles,
    run_episode,
    semantic_commit,
)
from arcmem.preprocess import save_document

from .conftest import SERIES, make_context, normalized_doc, seed_character


def commit_arc(stores, title, arc_type=ArcType.SOAP, episodes=((1, 1),), main_names=("Lena Vasquez",)):
    main_ids = tuple(
        stores.relational.find_character_by_appellation(SERIES, n).character_id for n in main_names
    )
    arc_id = derive_id("arc", SERIES, title)
    progressions = [
        Progression.build(
            progression_id=derive_id("progression", SERIES, f"{arc_id}:S{s:02d}E{e:02d}"),
            arc_id=arc_id,
            series=SERIES,
            episode=EpisodeKey(s, e),
            utterances=[f"{title} develops step {i}." for i in range(2)],
        )
        for s, e in episodes
    ]
    arc = NarrativeArc(
        arc_id=arc_id,
        series=SERIES,
        title=title,
        description=f"{title}: the crew works through it.",
        arc_type=arc_type,
        main_characters=main_ids,
        progressions=tuple(progressions),
    )
    stores.save_arc(arc)
    return arc


def draft(title, arc_type=ArcType.SOAP, origin="agent3_new", **kw):
    return ArcDraft(
        provisional_id=f"t-{title}",
        title=title,
        description=f"{title} described at length.",
        arc_type=arc_type,
        origin=origin,
        **kw,
    )


# -- agent 1 -----------------------------------------------------------------------


def test_agent1_empty_memory_flags_nothing(tmp_path, memory_stores):
    ctx = make_context(tmp_path, memory_stores, handlers={})
    assert agent1_identify_existing(ctx) == []


def test_agent1_flags_seeded_arc_on_lexical_overlap(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    arc = commit_arc(memory_stores, "Lena and Theo trust building on the line", episodes=((1, 1),))
    sentences = [
        "Lena and Theo trust building on the line continues at the dock.",
        "Lena and Theo trust building deepens.",
    ]
    ctx = make_context(tmp_path, memory_stores, handlers={}, episode=EpisodeKey(1, 2), sentences=sentences)
    flagged = agent1_identify_existing(ctx)
    assert [f.arc.arc_id for f in flagged] == [arc.arc_id]
    assert flagged[0].score >= ctx.config.flag_threshold


def test_agent1_never_sees_current_or_future_episodes(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    commit_arc(memory_stores, "Future storyline echo", episodes=((1, 2),))
    commit_arc(memory_stores, "Past storyline echo", episodes=((1, 1),))
    sentences = ["Future storyline echo rings.", "Past storyline echo rings."]
    ctx = make_context(tmp_path, memory_stores, handlers={}, episode=EpisodeKey(1, 2), sentences=sentences)
    agent1_identify_existing(ctx)
    [entry] = ctx.trace
    current = (ctx.episode.season, ctx.episode.episode)
    for hits in entry.notes["retrieved"]:
        for hit in hits:
            assert hit["episode"] is not None
            key = EpisodeKey.parse(hit["episode"])
            assert (key.season, key.episode) < current


def test_agent1_below_threshold_not_flagged(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    commit_arc(memory_stores, "Completely unrelated budget meeting", episodes=((1, 1),))
    ctx = make_context(
        tmp_path,
        memory_stores,
        handlers={},
        episode=EpisodeKey(1, 2),
        sentences=["A quiet rescue of a kayaker proceeds offshore near the rocks."],
    )
    assert agent1_identify_existing(ctx) == []


# -- agents 4, 5, 7, 8 -------------------------------------------------------------


def test_agent4_merges_overlapping_drafts(tmp_path, memory_stores):
    handlers = {
        "agent4_optimize": lambda v: {
            "merges": [{"indices": [0, 1], "title": "Storm readiness", "description": "One storyline."}]
        }
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    ctx.begin_agent("test")
    drafts = [
        draft("Storm season readiness", ArcType.GENRE_SPECIFIC),
        draft("Station readiness for storms", ArcType.GENRE_SPECIFIC),
        draft("Kayak rescue", ArcType.ANTHOLOGY, origin="agent2"),
    ]
    out = agent4_optimize_season(ctx, drafts)
    assert len(out) == 2
    merged = [d for d in out if d.origin == "merged"]
    assert len(merged) == 1
    assert merged[0].arc_type is ArcType.GENRE_SPECIFIC
    anthology = [d for d in out if d.arc_type is ArcType.ANTHOLOGY]
    assert anthology == [drafts[2]]  # untouched


def test_agent4_disjoint_drafts_unchanged(tmp_path, memory_stores):
    ctx = make_context(tmp_path, memory_stores, handlers={"agent4_optimize": lambda v: {"merges": []}})
    drafts = [draft("One", ArcType.SOAP), draft("Two", ArcType.GENRE_SPECIFIC)]
    assert agent4_optimize_season(ctx, drafts) == drafts


def test_agent4_skips_gateway_without_serial_drafts(tmp_path, memory_stores):
    ctx = make_context(tmp_path, memory_stores, handlers={})
    drafts = [draft("Solo case", ArcType.ANTHOLOGY, origin="agent2")]
    assert agent4_optimize_season(ctx, drafts) == drafts
    assert ctx.provider.requests == []


def test_agent5_resolves_cross_type_duplicate(tmp_path, memory_stores):
    handlers = {
        "agent5_deduplicate": lambda v: {"duplicates": [{"indices": [0, 1], "keep_type": "anthology"}]}
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    drafts = [
        draft("Engine fire", ArcType.ANTHOLOGY, origin="agent2"),
        draft("Engine fire response", ArcType.GENRE_SPECIFIC),
    ]
    out = agent5_deduplicate(ctx, drafts)
    assert len(out) == 1
    assert out[0].arc_type is ArcType.ANTHOLOGY


def test_agent5_repairs_type_outside_candidates(tmp_path, memory_stores):
    handlers = {
        "agent5_deduplicate": lambda v: {"duplicates": [{"indices": [0, 1], "keep_type": "soap"}]}
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    drafts = [
        draft("Engine fire", ArcType.ANTHOLOGY, origin="agent2"),
        draft("Engine fire response", ArcType.GENRE_SPECIFIC),
    ]
    out = agent5_deduplicate(ctx, drafts)
    assert out[0].arc_type in (ArcType.ANTHOLOGY, ArcType.GENRE_SPECIFIC)


def test_agent5_identity_when_no_duplicates(tmp_path, memory_stores):
    ctx = make_context(tmp_path, memory_stores, handlers={"agent5_deduplicate": lambda v: {"duplicates": []}})
    drafts = [draft("One", ArcType.SOAP), draft("Two", ArcType.ANTHOLOGY, origin="agent2")]
    assert agent5_deduplicate(ctx, drafts) == drafts


def test_agent7_removes_offtopic_and_drops_emptied(tmp_path, memory_stores):
    def verify(variables):
        lines = variables["utterances"].splitlines()
        if "off-topic" in variables["utterances"]:
            return {"keep": [i for i, line in enumerate(lines) if "off-topic" not in line]}
        return {"keep": []}

    ctx = make_context(tmp_path, memory_stores, handlers={"agent7_verify_progressions": verify})
    drafts = [
        draft("Keeps", progression_content=("Relevant one.", "An off-topic aside.", "Relevant two.")),
        draft("Empties", progression_content=("Everything here is wrong.",)),
    ]
    out = agent7_verify_progressions(ctx, drafts)
    assert len(out) == 1
    assert out[0].progression_content == ("Relevant one.", "Relevant two.")
    [entry] = ctx.trace
    assert entry.notes["VERIFIER_EMPTIED"] == ["t-Empties"]


def test_agent7_keeps_all_relevant(tmp_path, memory_stores):
    ctx = make_context(
        tmp_path,
        memory_stores,
        handlers={"agent7_verify_progressions": lambda v: {"keep": list(range(len(v["utterances"].splitlines())))}},
    )
    d = draft("Full", progression_content=("One.", "Two."))
    assert agent7_verify_progressions(ctx, [d])[0].progression_content == ("One.", "Two.")


def test_agent8_moves_character_and_repairs_overlap(tmp_path, memory_stores):
    handlers = {
        "agent8_verify_roles": lambda v: {
            "main_characters": ["Lena Vasquez"],
            "interfering_characters": ["Lena Vasquez", "Noor Haddad"],
        }
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    d = draft(
        "Roles",
        main_characters=("Lena Vasquez", "Noor Haddad"),
        progression_content=("Something happens.",),
    )
    [out] = agent8_verify_roles(ctx, [d])
    assert out.main_characters == ("Lena Vasquez",)
    assert out.interfering_characters == ("Noor Haddad",)


def test_agent8_identity_on_correct_input(tmp_path, memory_stores):
    handlers = {
        "agent8_verify_roles": lambda v: {
            "main_characters": [n for n in v["main_characters"].split(", ")],
            "interfering_characters": [],
        }
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    d = draft("Same", main_characters=("Lena Vasquez",), progression_content=("One.",))
    [out] = agent8_verify_roles(ctx, [d])
    assert out.main_characters == d.main_characters


def test_agent6_hard_error_without_resolvable_roster(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    handlers = {
        "agent6_enhance": lambda v: {
            "main_characters": ["Lena Vasquez"],
            "interfering_characters": ["Ghost Name"],
            "utterances": ["Lena acts."],
        }
    }
    ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    [out] = agent6_enhance_details(ctx, [draft("Enhanced")])
    assert out.main_characters == ("Lena Vasquez",)
    assert out.progression_content == ("Lena acts.",)
    [entry] = ctx.trace
    assert entry.notes["unresolved_names"] == {"t-Enhanced": ["Ghost Name"]}


# -- semantic commit ----------------------------------------------------------------


def test_commit_creates_on_empty_store(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    ctx = make_context(tmp_path, memory_stores, handlers={})
    d = draft("Fresh storyline", main_characters=("Lena Vasquez",), progression_content=("Lena acts.",))
    outcome, arc_id = semantic_commit(ctx, d)
    assert outcome == "created"
    arc = memory_stores.relational.load_arc(arc_id)
    assert validate_arc(arc) == []
    assert len(arc.progressions) == 1


def test_commit_links_near_duplicate_with_affirmative_adjudication(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    existing = commit_arc(memory_stores, "Lena and Theo: trust on the line")
    handlers = {"same_storyline": lambda v: {"same_storyline": True}}
    ctx = make_context(tmp_path, memory_stores, handlers=handlers, episode=EpisodeKey(1, 2))
    ctx.begin_agent("test")
    d = draft(
        "Lena and Theo: trust on the line",
        main_characters=("Lena Vasquez",),
        progression_content=("Trust deepens offshore.",),
    )
    outcome, arc_id = semantic_commit(ctx, d)
    assert outcome == "linked"
    assert arc_id == existing.arc_id
    arc = memory_stores.relational.load_arc(arc_id)
    assert [str(e) for e in arc.episodes()] == ["S01E01", "S01E02"]
    # Linked progressions carry the draft content verbatim.
    assert arc.progressions[-1].utterance_texts() == ["Trust deepens offshore."]


def test_commit_similarity_alone_never_links(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    existing = commit_arc(memory_stores, "Lena and Theo: trust on the line")
    handlers = {"same_storyline": lambda v: {"same_storyline": False}}
    ctx = make_context(tmp_path, memory_stores, handlers=handlers, episode=EpisodeKey(1, 2))
    ctx.begin_agent("test")
    d = draft(
        "Lena and Theo: trust on the line",
        main_characters=("Lena Vasquez",),
        progression_content=("Trust deepens offshore.",),
    )
    outcome, arc_id = semantic_commit(ctx, d)
    assert outcome == "created"
    assert arc_id != existing.arc_id
    assert len(ctx.provider.requests) >= 1  # adjudication did happen


def test_commit_validated_continuation_links_directly(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    existing = commit_arc(memory_stores, "Ongoing storyline")
    ctx = make_context(tmp_path, memory_stores, handlers={}, episode=EpisodeKey(1, 2))
    d = draft(
        "Ongoing storyline",
        origin="agent3_validated",
        existing_arc_id=existing.arc_id,
        main_characters=("Lena Vasquez",),
        progression_content=("It keeps going.",),
    )
    outcome, arc_id = semantic_commit(ctx, d)
    assert (outcome, arc_id) == ("linked", existing.arc_id)
    assert ctx.provider.requests == []  # no adjudication needed


def test_commit_anthology_link_rejected_by_validation(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    existing = commit_arc(memory_stores, "One-shot case", arc_type=ArcType.ANTHOLOGY, episodes=((1, 1),))
    handlers = {"same_storyline": lambda v: {"same_storyline": True}}
    ctx = make_context(tmp_path, memory_stores, handlers=handlers, episode=EpisodeKey(1, 2))
    ctx.begin_agent("test")
    d = ArcDraft(
        provisional_id="t-one-shot",
        title="One-shot case",
        description="One-shot case: the crew works through it.",  # near-identical summary
        arc_type=ArcType.ANTHOLOGY,
        origin="agent2",
        main_characters=("Lena Vasquez",),
        progression_content=("A second episode would break the type.",),
    )
    outcome, arc_id = semantic_commit(ctx, d)
    assert outcome == "created"
    assert arc_id != existing.arc_id
    # The stored anthology arc still has exactly one episode.
    assert len(memory_stores.relational.load_arc(existing.arc_id).progressions) == 1
    [entry] = ctx.trace
    assert any(a.get("link_rejected") == "validate_arc" for a in entry.notes["adjudications"])


# -- run_episode ------------------------------------------------------------------------


def full_handlers(anthology_titles=("Gull Rock kayak rescue",), serial_titles=("Lena and Theo",)):
    return {
        "agent2_anthology": lambda v: {
            "arcs": [{"title": t, "description": f"{t} happens."} for t in anthology_titles]
        },
        "agent3_serial": lambda v: {
            "new_arcs": [
                {"title": t, "description": f"{t} grows.", "arc_type": "soap"} for t in serial_titles
            ],
            "validations": [],
        },
        "agent4_optimize": lambda v: {"merges": []},
        "agent5_deduplicate": lambda v: {"duplicates": []},
        "agent6_enhance": lambda v: {
            "main_characters": ["Lena Vasquez"],
            "interfering_characters": [],
            "utterances": [f"{v['title']} moves forward.", f"{v['title']} resolves a beat."],
        },
        "agent7_verify_progressions": lambda v: {"keep": list(range(len(v["utterances"].splitlines())))},
        "agent8_verify_roles": lambda v: {
            "main_characters": v["main_characters"].split(", "),
            "interfering_characters": [],
        },
        "agent9_final_review": lambda v: {"approved": list(range(len([l for l in v["drafts"].splitlines() if l and l[0].isdigit()])))},
        "same_storyline": lambda v: {"same_storyline": False},
    }


def staged(tmp_path, ctx):
    episodes_dir = tmp_path / "ws" / "episodes"
    save_document(episodes_dir, ctx.doc)
    return episodes_dir


def test_run_episode_produces_nine_trace_entries(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    ctx = make_context(tmp_path, memory_stores, handlers=full_handlers())
    episodes_dir = staged(tmp_path, ctx)
    result = run_episode(ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)
    assert [t.agent for t in result.agent_trace] == [f"agent{i}" for i in range(1, 10)]
    assert result.new_arcs == 2
    assert result.continued_arcs == 0
    assert result.new_arcs + result.continued_arcs == len(result.committed_arcs)


def test_run_episode_ordering_enforced(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    ctx1 = make_context(tmp_path, memory_stores, handlers=full_handlers(), episode=EpisodeKey(1, 1))
    episodes_dir = staged(tmp_path, ctx1)
    ctx2 = make_context(tmp_path, memory_stores, handlers=full_handlers(), episode=EpisodeKey(1, 2))
    save_document(episodes_dir, ctx2.doc)
    with pytest.raises(OrderingError):
        run_episode(ctx2, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)


def test_run_episode_noop_without_force(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    ctx = make_context(tmp_path, memory_stores, handlers=full_handlers())
    episodes_dir = staged(tmp_path, ctx)
    first = run_episode(ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)
    again_ctx = make_context(tmp_path, memory_stores, handlers=full_handlers())
    again = run_episode(again_ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)
    assert again.no_op
    assert again.committed_arcs == first.committed_arcs


def test_run_episode_conservation_of_utterances(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    ctx = make_context(tmp_path, memory_stores, handlers=full_handlers())
    episodes_dir = staged(tmp_path, ctx)
    result = run_episode(ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)
    agent9 = result.agent_trace[8]
    for commit in agent9.notes["commits"]:
        arc = memory_stores.relational.load_arc(commit["arc_id"])
        progression = arc.progression_for(EpisodeKey(1, 1))
        assert len(progression.content) == commit["utterances"]


def test_run_episode_checkpoint_resume(tmp_path, memory_stores):
    seed_character(memory_stores, "Lena Vasquez")
    handlers = full_handlers()
    failures = {"count": 0}

    def flaky_agent6(v):
        failures["count"] += 1
        raise RuntimeError("transient agent6 failure")

    broken = dict(handlers)
    broken["agent6_enhance"] = flaky_agent6
    ctx = make_context(tmp_path, memory_stores, handlers=broken)
    episodes_dir = staged(tmp_path, ctx)
    with pytest.raises(Exception, match="transient"):
        run_episode(ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)

    from arcmem.pipeline import checkpoint_path

    cp = checkpoint_path(tmp_path / "runs", ctx.series, ctx.episode)
    assert cp.exists()

    resumed_ctx = make_context(tmp_path, memory_stores, handlers=handlers)
    result = run_episode(resumed_ctx, runs_dir=tmp_path / "runs", episodes_dir=episodes_dir)
    assert [t.agent for t in result.agent_trace] == [f"agent{i}" for i in range(1, 10)]
    assert not cp.exists()  # cleared on success
    # Agents 1-5 were not re-executed on resume.
    assert [t.agent for t in resumed_ctx.trace].count("agent5") == 1
