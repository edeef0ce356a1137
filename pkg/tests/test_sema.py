import pytest
from hypothesis import given, strategies as st

from gustl.diagnostics import SemaError
from gustl.sema import analyze
from gustl.syntax import parse
from helpers import expected_code, negative_programs, positive_programs


def check(src):
    return analyze(parse(src))


def codes(src):
    try:
        check(src)
    except SemaError as exc:
        return exc.codes
    return []


@pytest.mark.parametrize("path", negative_programs(), ids=lambda p: p.stem)
def test_negative_corpus(path):
    from gustl.diagnostics import CompileError
    try:
        analyze(parse(path.read_bytes()))
    except CompileError as exc:
        assert exc.codes == [expected_code(path)]
    else:
        pytest.fail("accepted")


@pytest.mark.parametrize("path", positive_programs(), ids=lambda p: p.name)
def test_positive_corpus_accepted(path):
    check(path.read_bytes())


def test_affine_sizing_example():
    # hand count: buf contributes 2*dim + 3, x contributes 1
    p = check("process p(c, dimension) word buf[2*dimension+3], x start stop")
    assert (p.d1, p.d0) == (2, 4)


def test_dimension_only():
    p = check("process p(c, dim) word buf[dim] start stop")
    assert (p.d1, p.d0) == (1, 0)


def test_sizes_through_constants():
    p = check("const n = 4 process p(c, d) const m = 3 * d - 1 + n word a[m], b[#a + 2], "
              "e[(d + 1) * 2] start stop")
    # a: 3d+3, b: 3d+5, e: 2d+2
    assert (p.d1, p.d0) == (8, 10)


def test_dimension_in_scalar_const():
    assert codes("process p(c, d) const k = d * d start c ! k stop") == []


def test_nonaffine_size_rejected():
    assert codes("process p(c, d) const k = d * d word a[k] start stop") == ["E-NONAFFINE"]
    assert codes("process p(c, d) word a[d / 2] start stop") == ["E-NONAFFINE"]


def test_size_must_be_constant():
    assert codes("word x process p(c) word a[x] start stop") == ["E-NOT-CONST"]


def test_spec_examples():
    assert codes("process p(c) state run, fin word v start next run "
                 "on run \\ c ? v: next fin stop") == ["E-END-GUARD"]
    assert codes("process p(c) state s start next s on s \\ after 5: next s "
                 "on s \\ after 9: next s stop") == ["E-DUP-EXPIRE"]
    assert codes("procedure q() do next idle return process p(c) state idle "
                 "start next idle stop") == ["E-TRANSITION-IN-SUB"]


def test_statelist_checked_per_state():
    src = ("process p(c) state a, b word v start next a on a, b \\ c ? v: next a "
           "on a \\ c ? end: next a stop")
    assert codes(src) == ["E-END-GUARD"]


def test_guards_on_different_ports_are_distinct():
    src = ("process p(c) state s port q word v start next s on s \\ c ? v: next s "
           "on s \\ c ? end: next s on s \\ q ? v: next s on s \\ q ? end: next s "
           "on s \\ c !: next s on s \\ q !: next s stop")
    assert codes(src) == []


def test_guards_for_different_states_do_not_clash():
    src = "process p(c) state a, b start next a on a \\ after 1: next b on b \\ after 1: next a stop"
    assert codes(src) == []


def test_multiple_errors_reported():
    src = "process p(c) start c ! ghost c ! spook x := 1 stop"
    assert codes(src) == ["E-UNDECLARED"] * 3


def test_direct_recursion_allowed_forward_call_rejected():
    assert codes("function f(n) do if n then n := f(n - 1) done return n "
                 "process p(c) start c ! f(3) stop") == []
    assert codes("function f() do return g() function g() do return 1 "
                 "process p(c) start stop") == ["E-UNDECLARED"]


def test_declare_before_use_for_variables():
    assert codes("procedure q() do x := 1 return word x process p(c) start stop") == \
        ["E-UNDECLARED"]


def test_zero_state_program_falls_through():
    assert codes("process p(c) word x start x := 1 stop") == []
    assert codes("process p(c) start next s stop") == ["E-UNDECLARED"]


def test_path_rule():
    ok = ("process p(c) state a word x start if x then next a elseif x = 2 then next a "
          "else next a done on a: if x then next a else next a done stop")
    assert codes(ok) == []
    loop = "process p(c) state a start repeat 3 times next a done stop"
    assert codes(loop) == ["E-PATH-NO-TRANSITION"]
    bare = "process p(c) state a start next a on a: stop"
    assert codes(bare) == ["E-PATH-NO-TRANSITION"]


def test_argument_kinds():
    pre = "const k[] = 1 word w, arr[4] procedure q(v[], x, port o, const r[]) do return "
    assert codes(pre + "process p(c) start q(arr, w, c, k) stop") == []
    assert codes(pre + "process p(c) start q(arr[1], 1 + w, c, arr) stop") == []
    assert codes(pre + "process p(c) start q(k, w, c, k) stop") == ["E-ARG-KIND"]
    assert codes(pre + "process p(c) start q(arr, w, 3, k) stop") == ["E-ARG-KIND"]
    assert codes(pre + "process p(c) start q(arr, w, c) stop") == ["E-ARGS"]


def test_sizeof_requires_array():
    assert codes("word w process p(c) start c ! #w stop") == ["E-KIND"]


def test_constant_array_initializers():
    p = check('const s[] = "aé", 3 const t[5] = 1 process p(c) start c ! #s + #t stop')
    sym = p.globals
    assert sym["s"].values == [97, 0xE9, 3]
    assert sym["t"].values == [1, 0, 0, 0, 0]
    assert codes("const t[1] = 1, 2 process p(c) start stop") == ["E-CONST-OVERFLOW"]


def test_user_new_shadows_builtin():
    assert codes("function new(a, b, c) do return a + b + c "
                 "process p(c) start c ! new(1, 2, 3) stop") == []


def test_analyze_is_deterministic():
    src = (positive_programs()[3]).read_bytes()
    a, b = check(src), check(src)
    assert (a.d1, a.d0) == (b.d1, b.d0)
    assert list(a.globals) == list(b.globals)
    assert [s.address for s in a.variables] == [s.address for s in b.variables]


sizes = st.tuples(st.integers(0, 5), st.integers(0, 50))


@given(st.lists(sizes, min_size=1, max_size=8).flatmap(
    lambda xs: st.tuples(st.just(xs), st.permutations(range(len(xs))))))
def test_data_size_is_order_independent(case):
    decls, order = case

    def program(indices):
        words = ", ".join(f"v{i}[{decls[i][0]} * d + {decls[i][1]}]" if decls[i] != (0, 1)
                          else f"v{i}" for i in indices)
        return f"process p(c, d) word {words} start stop"

    oracle = (sum(a for a, _ in decls), sum(b for _, b in decls))
    assert (lambda p: (p.d1, p.d0))(check(program(range(len(decls))))) == oracle
    assert (lambda p: (p.d1, p.d0))(check(program(order))) == oracle
