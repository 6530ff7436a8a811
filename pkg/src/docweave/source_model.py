"""Static model of a Python repository.

Walks a source tree and produces the three granularities the rest of the
pipeline works with: components (top-level functions, classes, and the
methods inside those classes), modules (directories, closed under their
parent directories), and a single repository unit. Also extracts
best-effort static dependencies between components and the entity sets
used for coverage scoring.

Only the AST is consulted; nothing is imported or executed.
"""

from __future__ import annotations

import ast
import builtins
import logging
import os
import posixpath
import textwrap
from dataclasses import dataclass, field

from .errors import InputError

logger = logging.getLogger(__name__)

# Granularity labels used across the package.
COMPONENT = "component"
MODULE = "module"
REPO = "repo"

# The repository unit's graph id. Module ids are repo-relative directory
# paths, and "." is the root's own relative path, so it can never collide
# with a module id or a (dotted, multi-segment) component id.
REPO_ID = "."

DEFAULT_IGNORES = frozenset(
    {
        ".git",
        ".hg",
        ".svn",
        "__pycache__",
        ".tox",
        ".nox",
        ".venv",
        "venv",
        "env",
        ".eggs",
        "build",
        "dist",
        "node_modules",
        ".mypy_cache",
        ".pytest_cache",
        ".ruff_cache",
        ".idea",
        ".vscode",
        "tests",
        "test",
        "testing",
    }
)

_BUILTIN_NAMES = frozenset(dir(builtins))
_RECEIVERS = frozenset({"self", "cls"})


@dataclass(frozen=True)
class Component:
    """One documentable code unit: a function, class, or method."""

    id: str
    kind: str  # "function" | "method" | "class"
    path: str  # repo-relative posix path of the defining file
    start_line: int
    end_line: int
    source: str
    signature: str
    imports: tuple[str, ...]  # verbatim import statements of the whole file

    @property
    def name(self) -> str:
        return self.id.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class ModuleUnit:
    """A directory that contains at least one component, directly or below."""

    path: str
    children: tuple[str, ...]  # component ids, then sub-module paths


@dataclass(frozen=True)
class RepoUnit:
    name: str
    roots: tuple[str, ...]  # parentless components, then parentless modules


@dataclass(frozen=True)
class RawDependency:
    src: str
    dst: str
    kind: str  # "call" | "inheritance" | "attribute" | "import"


@dataclass(frozen=True)
class EntitySet:
    unit_id: str
    names: frozenset[str]


@dataclass
class RepoModel:
    root: str
    components: tuple[Component, ...]
    modules: tuple[ModuleUnit, ...]
    repo: RepoUnit
    warnings: tuple[str, ...] = ()
    component_index: dict[str, Component] = field(init=False, repr=False)
    module_index: dict[str, ModuleUnit] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.component_index = {c.id: c for c in self.components}
        self.module_index = {m.path: m for m in self.modules}

    def granularity_of(self, unit_id: str) -> str | None:
        if unit_id in self.component_index:
            return COMPONENT
        if unit_id in self.module_index:
            return MODULE
        if unit_id == REPO_ID:
            return REPO
        return None

    @property
    def file_paths(self) -> list[str]:
        return sorted({c.path for c in self.components})

    def components_in(self, path: str) -> list[Component]:
        return [c for c in self.components if c.path == path]


def _module_prefix(rel_path: str) -> str:
    """Dotted import-style prefix for a repo-relative .py path."""
    parts = rel_path[: -len(".py")].split("/")
    if parts[-1] == "__init__" and len(parts) > 1:
        parts = parts[:-1]
    return ".".join(parts)


def _signature_of(node: ast.AST) -> str:
    if isinstance(node, ast.ClassDef):
        heads = [ast.unparse(b) for b in node.bases]
        heads += [f"{k.arg}={ast.unparse(k.value)}" for k in node.keywords if k.arg]
        return f"class {node.name}({', '.join(heads)})" if heads else f"class {node.name}"
    assert isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef))
    head = "async def" if isinstance(node, ast.AsyncFunctionDef) else "def"
    sig = f"{head} {node.name}({ast.unparse(node.args)})"
    if node.returns is not None:
        sig += f" -> {ast.unparse(node.returns)}"
    return sig


def _span(node: ast.AST, lines: list[str]) -> tuple[int, int, str]:
    start = node.lineno
    decorators = getattr(node, "decorator_list", [])
    if decorators:
        start = min(start, min(d.lineno for d in decorators))
    end = node.end_lineno or node.lineno
    return start, end, "\n".join(lines[start - 1 : end])


def parse_repository(
    root_path: str | os.PathLike[str],
    ignore: frozenset[str] | set[str] | None = None,
) -> RepoModel:
    """Build the unit inventory of a repository.

    Files that fail to decode or parse are skipped with a warning rather
    than aborting the run. Raises InputError when root_path is not a
    directory or no Python file yields any component.
    """
    root = os.path.abspath(os.fspath(root_path))
    if not os.path.isdir(root):
        raise InputError(f"repository path is not a directory: {root}")
    ignored = DEFAULT_IGNORES if ignore is None else frozenset(ignore)

    warnings: list[str] = []
    components: list[Component] = []
    seen_ids: set[str] = set()

    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(
            d
            for d in dirnames
            if d not in ignored
            and not d.startswith(".")
            and not d.endswith(".egg-info")
        )
        for fname in sorted(filenames):
            if not fname.endswith(".py"):
                continue
            abs_path = os.path.join(dirpath, fname)
            rel = os.path.relpath(abs_path, root).replace(os.sep, "/")
            try:
                with open(abs_path, encoding="utf-8") as fh:
                    text = fh.read()
            except (OSError, UnicodeDecodeError) as exc:
                warnings.append(f"unreadable file skipped: {rel} ({exc})")
                logger.warning("unreadable file skipped: %s", rel)
                continue
            try:
                tree = ast.parse(text)
            except SyntaxError as exc:
                warnings.append(f"unparseable file skipped: {rel} (line {exc.lineno})")
                logger.warning("unparseable file skipped: %s", rel)
                continue
            components.extend(_file_components(rel, text, tree, seen_ids, warnings))

    if not components:
        raise InputError(f"no documentation units found under {root}")

    modules = derive_modules(components)
    repo = _derive_repo(os.path.basename(root) or root, components, modules)
    return RepoModel(
        root=root,
        components=tuple(components),
        modules=tuple(modules),
        repo=repo,
        warnings=tuple(warnings),
    )


def _file_components(
    rel: str,
    text: str,
    tree: ast.Module,
    seen_ids: set[str],
    warnings: list[str],
) -> list[Component]:
    lines = text.splitlines()
    prefix = _module_prefix(rel)
    imports = tuple(
        ast.get_source_segment(text, node) or ast.unparse(node)
        for node in tree.body
        if isinstance(node, (ast.Import, ast.ImportFrom))
    )

    out: list[Component] = []

    def add(node: ast.AST, kind: str, unit_id: str) -> None:
        if unit_id in seen_ids:
            warnings.append(f"duplicate unit id skipped: {unit_id} in {rel}")
            logger.warning("duplicate unit id skipped: %s", unit_id)
            return
        start, end, source = _span(node, lines)
        seen_ids.add(unit_id)
        out.append(
            Component(
                id=unit_id,
                kind=kind,
                path=rel,
                start_line=start,
                end_line=end,
                source=source,
                signature=_signature_of(node),
                imports=imports,
            )
        )

    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            add(node, "function", f"{prefix}.{node.name}")
        elif isinstance(node, ast.ClassDef):
            class_id = f"{prefix}.{node.name}"
            add(node, "class", class_id)
            for item in node.body:
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    add(item, "method", f"{class_id}.{item.name}")
    return out


def derive_modules(components: list[Component] | tuple[Component, ...]) -> list[ModuleUnit]:
    """Directories holding components, closed under parent directories.

    The repository root ("") is never a module; root-level files hang off
    the repository unit directly.
    """
    dirs: set[str] = set()
    for comp in components:
        d = posixpath.dirname(comp.path)
        while d:
            dirs.add(d)
            d = posixpath.dirname(d)

    modules = []
    for d in sorted(dirs):
        comp_children = sorted(c.id for c in components if posixpath.dirname(c.path) == d)
        sub_modules = sorted(m for m in dirs if posixpath.dirname(m) == d)
        modules.append(ModuleUnit(path=d, children=tuple(comp_children + sub_modules)))
    return modules


def _derive_repo(
    name: str,
    components: list[Component],
    modules: list[ModuleUnit],
) -> RepoUnit:
    root_components = sorted(
        c.id for c in components if posixpath.dirname(c.path) == ""
    )
    root_modules = sorted(m.path for m in modules if posixpath.dirname(m.path) == "")
    return RepoUnit(name=name, roots=tuple(root_components + root_modules))


# ---------------------------------------------------------------------------
# dependency extraction


def _component_ast(comp: Component) -> ast.Module | None:
    try:
        return ast.parse(textwrap.dedent(comp.source))
    except SyntaxError:  # decorated one-liners and similar oddities
        logger.warning("could not re-parse component %s", comp.id)
        return None


def _import_bindings(comp: Component) -> dict[str, str]:
    """Map local names bound by the file's imports to dotted targets."""
    file_dir = posixpath.dirname(comp.path)
    package = file_dir.replace("/", ".")
    bindings: dict[str, str] = {}
    for stmt in comp.imports:
        try:
            parsed = ast.parse(textwrap.dedent(stmt)).body
        except SyntaxError:
            continue
        for node in parsed:
            if isinstance(node, ast.Import):
                for alias in node.names:
                    if alias.asname:
                        bindings[alias.asname] = alias.name
                    else:
                        head = alias.name.split(".")[0]
                        bindings[head] = head
            elif isinstance(node, ast.ImportFrom):
                base = _resolve_from_base(node, package)
                if base is None:
                    continue
                for alias in node.names:
                    if alias.name == "*":
                        continue
                    local = alias.asname or alias.name
                    bindings[local] = f"{base}.{alias.name}" if base else alias.name
    return bindings


def _resolve_from_base(node: ast.ImportFrom, package: str) -> str | None:
    if node.level == 0:
        return node.module or None
    parts = package.split(".") if package else []
    up = node.level - 1
    if up > len(parts):
        return None
    kept = parts[: len(parts) - up] if up else parts
    base = ".".join(kept)
    if node.module:
        base = f"{base}.{node.module}" if base else node.module
    return base or None


def _dotted_chain(node: ast.AST) -> list[str] | None:
    parts: list[str] = []
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
        parts.reverse()
        return parts
    return None


def extract_dependencies(
    components: list[Component] | tuple[Component, ...],
) -> list[RawDependency]:
    """Best-effort static component-to-component edges.

    A name resolves only through same-file top-level definitions, the
    file's imports, or a self/cls receiver inside a class; anything else
    (builtins, third-party modules, dynamic dispatch) is dropped.
    Self-edges are dropped. Output is deduplicated and sorted.
    """
    known = {c.id for c in components}
    file_defs: dict[str, dict[str, str]] = {}
    for comp in components:
        if "." not in comp.id.removeprefix(_module_prefix(comp.path) + "."):
            # top-level function or class: bind its bare name file-locally
            file_defs.setdefault(comp.path, {})[comp.name] = comp.id

    edges: set[RawDependency] = set()
    for comp in components:
        tree = _component_ast(comp)
        if tree is None:
            continue
        imports = _import_bindings(comp)
        bindings = dict(imports)
        bindings.update(file_defs.get(comp.path, {}))

        if comp.kind == "method":
            owner = comp.id.rsplit(".", 1)[0]
        elif comp.kind == "class":
            owner = comp.id
        else:
            owner = None

        def resolve(parts: list[str]) -> str | None:
            head = parts[0]
            receiver = head in _RECEIVERS
            if receiver:
                if owner is None or len(parts) < 2:
                    return None
                candidate = ".".join([owner] + parts[1:])
            elif head in bindings:
                candidate = ".".join([bindings[head]] + parts[1:])
            else:
                return None
            if candidate in known and candidate != comp.id:
                return candidate
            if not receiver:
                # a chain reaching into a known component (Settings.level)
                # depends on the longest component prefix
                pieces = candidate.split(".")
                for cut in range(len(pieces) - 1, 0, -1):
                    prefix = ".".join(pieces[:cut])
                    if prefix in known:
                        return prefix if prefix != comp.id else None
            return None

        call_funcs: set[int] = set()
        inner_attrs: set[int] = set()
        used_names: set[str] = set()
        for node in ast.walk(tree):
            if isinstance(node, ast.Call):
                call_funcs.add(id(node.func))
            if isinstance(node, ast.Attribute) and isinstance(node.value, ast.Attribute):
                inner_attrs.add(id(node.value))
            if isinstance(node, ast.Name) and isinstance(node.ctx, ast.Load):
                used_names.add(node.id)

        def add(dst: str | None, kind: str) -> None:
            if dst is not None:
                edges.add(RawDependency(src=comp.id, dst=dst, kind=kind))

        for node in ast.walk(tree):
            if isinstance(node, ast.Call):
                chain = _dotted_chain(node.func)
                if chain:
                    add(resolve(chain), "call")
            elif isinstance(node, ast.ClassDef):
                for base in node.bases:
                    chain = _dotted_chain(base)
                    if chain:
                        add(resolve(chain), "inheritance")
            elif isinstance(node, ast.Attribute):
                if id(node) in call_funcs or id(node) in inner_attrs:
                    continue
                chain = _dotted_chain(node)
                if chain:
                    add(resolve(chain), "attribute")

        for local, target in imports.items():
            if local in used_names and target in known and target != comp.id:
                add(target, "import")

    return sorted(edges, key=lambda e: (e.src, e.dst, e.kind))


# ---------------------------------------------------------------------------
# entities and small component facts


def extract_entities(unit_id: str, model: RepoModel) -> EntitySet:
    """Names a complete document for the unit is expected to mention.

    Component: identifiers appearing in its source (variables read or
    written, parameters, nested definitions) plus its own bare name,
    with builtins and the self/cls receivers excluded. Module: bare
    names of its child components. Repository: names of the top-level
    modules and of root-level components.
    """
    granularity = model.granularity_of(unit_id)
    if granularity is None:
        raise InputError(f"unknown unit id: {unit_id}")

    if granularity == COMPONENT:
        comp = model.component_index[unit_id]
        names = _component_identifiers(comp)
        names.add(comp.name)
        return EntitySet(unit_id=unit_id, names=frozenset(names))

    if granularity == MODULE:
        mod = model.module_index[unit_id]
        names = {
            model.component_index[child].name
            for child in mod.children
            if child in model.component_index
        }
        return EntitySet(unit_id=unit_id, names=frozenset(names))

    names = set()
    for root_id in model.repo.roots:
        if root_id in model.component_index:
            names.add(model.component_index[root_id].name)
        else:
            names.add(posixpath.basename(root_id))
    return EntitySet(unit_id=unit_id, names=frozenset(names))


def _component_identifiers(comp: Component) -> set[str]:
    tree = _component_ast(comp)
    if tree is None:
        return set()
    names: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(node.name)
        elif isinstance(node, ast.arg):
            names.add(node.arg)
    return names - _BUILTIN_NAMES - _RECEIVERS


def component_parameters(comp: Component) -> tuple[str, ...]:
    """Parameter names of a function/method, or of a class's __init__.

    The self/cls receiver is not counted.
    """
    tree = _component_ast(comp)
    if tree is None or not tree.body:
        return ()
    node = tree.body[0]
    if isinstance(node, ast.ClassDef):
        node = next(
            (
                item
                for item in node.body
                if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef))
                and item.name == "__init__"
            ),
            None,
        )
    if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
        return ()
    args = node.args
    ordered = list(args.posonlyargs) + list(args.args)
    names = [a.arg for a in ordered]
    if comp.kind in ("method", "class") and names and names[0] in _RECEIVERS:
        names = names[1:]
    if args.vararg:
        names.append(args.vararg.arg)
    names.extend(a.arg for a in args.kwonlyargs)
    if args.kwarg:
        names.append(args.kwarg.arg)
    return tuple(names)


def component_raises(comp: Component) -> bool:
    tree = _component_ast(comp)
    if tree is None:
        return False
    return any(isinstance(node, ast.Raise) for node in ast.walk(tree))
