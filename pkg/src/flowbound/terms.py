"""Symbolic flow terms: letters, concatenation, and the omega-star loop
operator, with the root-extraction convention for loop bodies.

Text syntax: generator names juxtaposed (whitespace optional), `(tau)^w*`
for the loop operator, `ε` (or `eps`) for the empty term.
"""

from __future__ import annotations

from dataclasses import dataclass

EPSILON_TEXT = "ε"


class TermSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    """A flow term; `kind` is one of 'eps', 'letter', 'concat', 'loop'."""

    kind: str
    letter: str = None
    parts: tuple = ()

    def __post_init__(self):
        if self.kind == "concat" and len(self.parts) < 2:
            raise ValueError("concat needs at least two parts")

    # -- constructors ----------------------------------------------------

    @staticmethod
    def eps():
        return Term("eps")

    @staticmethod
    def of_letter(x):
        return Term("letter", letter=x)

    @staticmethod
    def word(letters):
        parts = tuple(Term.of_letter(x) for x in letters)
        if not parts:
            return Term.eps()
        if len(parts) == 1:
            return parts[0]
        return Term("concat", parts=parts)

    @staticmethod
    def concat(parts):
        flat = []
        for p in parts:
            if p.kind == "eps":
                continue
            if p.kind == "concat":
                flat.extend(p.parts)
            else:
                flat.append(p)
        if not flat:
            return Term.eps()
        if len(flat) == 1:
            return flat[0]
        return Term("concat", parts=tuple(flat))

    @staticmethod
    def loop(body):
        """body^(w*) with roots extracted: (u^k)^w* is u^w*."""
        root = extract_root(body)
        return Term("loop", parts=(root,))

    # -- structure -------------------------------------------------------

    def atoms(self):
        """Flattened sequence of letters and loop subterms."""
        if self.kind == "eps":
            return ()
        if self.kind in ("letter", "loop"):
            return (self,)
        out = []
        for p in self.parts:
            out.extend(p.atoms())
        return tuple(out)

    def letters(self):
        """Total count of letter occurrences, loops included."""
        if self.kind == "eps":
            return 0
        if self.kind == "letter":
            return 1
        if self.kind == "loop":
            return self.parts[0].letters()
        return sum(p.letters() for p in self.parts)

    def nesting(self):
        if self.kind in ("eps", "letter"):
            return 0
        if self.kind == "loop":
            return 1 + self.parts[0].nesting()
        return max(p.nesting() for p in self.parts)

    def loop_bodies(self):
        """All loop-operator bodies, outermost first."""
        if self.kind == "loop":
            return (self.parts[0],) + self.parts[0].loop_bodies()
        if self.kind == "concat":
            out = []
            for p in self.parts:
                out.extend(p.loop_bodies())
            return tuple(out)
        return ()

    def format(self):
        if self.kind == "eps":
            return EPSILON_TEXT
        if self.kind == "letter":
            return self.letter
        if self.kind == "loop":
            return f"({self.parts[0].format()})^w*"
        sep = "" if all(
            a.kind == "loop" or len(a.letter) == 1 for a in self.parts
        ) else " "
        return sep.join(p.format() for p in self.parts)

    def __str__(self):
        return self.format()


def extract_root(term):
    """Primitive root of a term's atom sequence: abab -> ab."""
    atoms = term.atoms()
    n = len(atoms)
    if n <= 1:
        return term
    for p in range(1, n):
        if n % p == 0 and atoms[:p] * (n // p) == atoms:
            return Term.concat(atoms[:p])
    return term


def is_proper_power(term):
    return extract_root(term).atoms() != term.atoms()


def parse_term(text, alphabet):
    """Parse the text syntax over the given generator names."""
    names = sorted(alphabet, key=len, reverse=True)
    pos = 0
    text = text.strip()

    def parse_seq(depth):
        nonlocal pos
        parts = []
        while pos < len(text):
            ch = text[pos]
            if ch.isspace():
                pos += 1
                continue
            if ch == ")":
                if depth == 0:
                    raise TermSyntaxError(f"unbalanced ')' at {pos}")
                return parts
            if ch == "(":
                pos += 1
                inner = parse_seq(depth + 1)
                if pos >= len(text) or text[pos] != ")":
                    raise TermSyntaxError("missing ')'")
                pos += 1
                if text[pos : pos + 3] == "^w*":
                    pos += 3
                    parts.append(Term.loop(Term.concat(inner)))
                else:
                    parts.extend(inner)
                continue
            if text.startswith(EPSILON_TEXT, pos):
                pos += len(EPSILON_TEXT)
                continue
            if text.startswith("eps", pos):
                pos += 3
                continue
            for nm in names:
                if text.startswith(nm, pos):
                    pos += len(nm)
                    parts.append(Term.of_letter(nm))
                    break
            else:
                raise TermSyntaxError(f"unknown symbol at {pos}: {text[pos:]!r}")
        return parts

    parts = parse_seq(0)
    if pos != len(text):
        raise TermSyntaxError(f"trailing input at {pos}")
    return Term.concat(parts)


# -- enumeration --------------------------------------------------------------


def primitive_words(alphabet, max_len):
    """Primitive words over the sorted alphabet, by (length, lex)."""
    alphabet = sorted(alphabet)
    out = []
    for length in range(1, max_len + 1):
        for word in _words_of(alphabet, length):
            if not _is_power(word):
                out.append(word)
    return out


def _words_of(alphabet, length):
    if length == 0:
        yield ()
        return
    for w in _words_of(alphabet, length - 1):
        for x in alphabet:
            yield w + (x,)


def _is_power(word):
    n = len(word)
    for p in range(1, n):
        if n % p == 0 and word[:p] * (n // p) == word:
            return True
    return False


def enumerate_loop_atoms(M, max_letters, max_nesting, certify=None):
    """Loop atoms (body)^w* within budget, deduplicated by behavior.

    Level-1 bodies are primitive words, keeping the first word per monoid
    image.  Level-2 bodies are u A v with A a level-1 atom, deduplicated by
    ([u], A, [v]).  `certify` filters bodies; rejected bodies are skipped.
    """
    atoms = []
    seen_m = {}
    for w in primitive_words(M.generators.keys(), max_letters):
        m = M.eval_word(w)
        if m in seen_m:
            continue
        seen_m[m] = w
        body = Term.word(w)
        if certify is None or certify(body):
            atoms.append(Term.loop(body))
    if max_nesting < 2:
        return atoms
    level2 = []
    seen2 = set()
    inner_atoms = list(atoms)
    # prefix/suffix words deduplicated by monoid image, shortest first
    word_reps = {M.identity: ()}
    for w in _all_words(M, max_letters):
        word_reps.setdefault(M.eval_word(w), w)
    reps = sorted(word_reps.items(), key=lambda kv: (len(kv[1]), kv[1]))
    for inner in inner_atoms:
        ilen = inner.letters()
        for mu, u in reps:
            for mv, v in reps:
                if len(u) + len(v) + ilen > max_letters:
                    continue
                key = (mu, inner, mv)
                if key in seen2:
                    continue
                seen2.add(key)
                body = Term.concat(
                    [Term.word(u), inner, Term.word(v)]
                )
                if is_proper_power(body):
                    continue
                if certify is None or certify(body):
                    level2.append(Term.loop(body))
    level2.sort(key=lambda t: (t.letters(), t.format()))
    return atoms + level2


def _all_words(M, max_len):
    for length in range(1, max_len + 1):
        yield from _words_of(sorted(M.generators.keys()), length)
