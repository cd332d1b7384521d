"""Synthetic annotated OCR output for event posters and product pages.

Documents are generated as OCR-JSON objects, then parsed, so they pass the
same validation as real input. Layout regularities built in:

* event titles share font size, position and vocabulary with promo
  banners for other events; the block that follows tells them apart
  (a title is followed by its date or venue, a promo by "save the date"
  style text);
* product pages repeat the title wording in the description, and the
  "related items" section reuses the title/price block pattern with
  smaller fonts lower on the page;
* some blocks are over-split into two vertically adjacent pieces.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, split_of
from .document import DEFAULT_MERGE_ALPHA, VisualDocument, parse_document, tokenize
from .head import DOMAIN_CLASSES

PAGE_WIDTH = 720
MARGIN = 32
MIN_PAGE_HEIGHT = 1280


@dataclass(frozen=True)
class GeneratorConfig:
    domain: str = "event"
    count: int = 100
    seed: int = 0
    distractor_rate: float = 0.6
    split_rate: float = 0.2
    font_jitter: float = 0.04
    merge_alpha: float = DEFAULT_MERGE_ALPHA

    def __post_init__(self):
        if self.domain not in DOMAIN_CLASSES:
            raise ValueError(f"domain must be one of {sorted(DOMAIN_CLASSES)}")
        if self.count < 10:
            raise ValueError(f"count must be >= 10, got {self.count}")
        for name in ("distractor_rate", "split_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


# ---------------------------------------------------------------------------
# Lexicons

SEASONS = ["Summer", "Winter", "Spring", "Autumn", "Midnight", "Downtown", "Annual", "Grand",
           "Neon", "Riverside", "Harbor", "Moonlight", "Northside", "Open-Air", "Sunset", "Urban"]
GENRES = ["Jazz", "Blues", "Film", "Food", "Art", "Craft Beer", "Poetry", "Comedy", "Salsa",
          "Book", "Wine", "Robotics", "Folk", "Vinyl", "Startup", "Yoga", "Chess", "Taco"]
KINDS = ["Night", "Festival", "Fair", "Gala", "Showcase", "Market", "Concert", "Marathon", "Expo",
         "Jam", "Summit", "Carnival", "Social", "Workshop", "Party"]
VENUE_NAMES = ["Lincoln", "Maple", "Civic", "Harborview", "Oakwood", "Riverside", "Union", "Liberty",
               "Granite", "Pioneer", "Sterling", "Cedar", "Westgate", "Highland", "Bayside"]
VENUE_KINDS = ["Hall", "Park", "Theater", "Center", "Arena", "Gallery", "Pavilion", "Ballroom",
               "Library", "Plaza", "Club", "Warehouse"]
CITIES = ["Springfield", "Riverton", "Fairview", "Lakewood", "Georgetown", "Ashland", "Clayton",
          "Madison", "Salem", "Dover"]
WEEKDAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August", "September",
          "October", "November", "December"]
ORGANIZERS = ["City Arts Council", "The Student Union", "Friends of the Library", "Local 42",
              "Downtown Business Alliance", "Parks Department", "Community Radio"]
PROMO_CUES = ["Save the date", "Coming soon", "Next season", "Stay tuned for more",
              "Announcing our next event", "Mark your calendars", "Watch this space"]
EVENT_FILLER = [
    "Join us for an unforgettable evening of {genre} with friends and neighbors",
    "Bring your family and enjoy live {genre} all night long",
    "All ages welcome and food trucks on site",
    "Featuring local artists and special guests from across the region",
    "Proceeds support community programs and youth scholarships",
    "Over ${big} raised for charity last year",
    "Established in {year} and now bigger than ever",
    "Limited seating so arrive early",
    "Free parking available behind the venue",
    "Celebrate the best of {genre} in our city",
    "Last year we welcomed {num} visitors",
]
FOOTERS = ["More info at www.{slug}.com", "Follow us @{slug}", "Questions? Call 555-{num4}",
           "Visit {slug}.org for details", "Sponsored by {org}"]

BRANDS = ["Acme", "Northwind", "Zenith", "Lumos", "Vertex", "Kestrel", "Orbit", "Pinecrest",
          "Solace", "Trailhead", "Nimbus", "Copperline", "Everest", "Brightway"]
PROD_ADJ = ["UltraSoft", "Classic", "Lightweight", "Premium", "Waterproof", "Slim", "Heavy-Duty",
            "Compact", "Wireless", "Ergonomic", "Vintage", "Insulated", "Portable", "Deluxe"]
MATERIALS = ["Cotton", "Leather", "Bamboo", "Steel", "Ceramic", "Wool", "Canvas", "Aluminum",
             "Oak", "Silicone", "Linen", "Carbon"]
NOUNS = ["Hoodie", "Backpack", "Water Bottle", "Desk Lamp", "Headphones", "Mug", "Jacket",
         "Cutting Board", "Phone Case", "Sneakers", "Blanket", "Wallet", "Tent", "Keyboard",
         "Speaker", "Chair"]
STORES = ["ShopMart", "BuyRight", "Cartwheel", "MegaStore", "Basket & Co"]
CATEGORIES = ["Home", "Clothing", "Outdoors", "Electronics", "Kitchen", "Office", "Sports"]
PROD_FILLER = [
    "The {name} is built to last with {material} construction",
    "Our {adj} {noun} keeps up with your busy day",
    "This {noun} from {brand} is a customer favorite",
    "Made with premium {material} for everyday comfort",
    "Easy to clean and backed by a two year warranty",
    "Pairs perfectly with the rest of the {brand} collection",
    "Ships in recyclable packaging",
    "Designed in {city} and tested by real customers",
]
NAMED_FILLER = [t for t in PROD_FILLER if "{" in t and "{city}" not in t]


# ---------------------------------------------------------------------------
# Logical blocks

@dataclass
class _Block:
    segments: list[tuple[str, str | None]]  # (text, gold class or None)
    font: float
    centered: bool = False
    splittable: bool = True


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _price(rng, lo=5, hi=120) -> str:
    whole = int(rng.integers(lo, hi))
    if rng.random() < 0.5:
        return f"${whole}"
    return f"${whole}.{int(rng.integers(0, 100)):02d}"


def _event_title(rng) -> str:
    parts = [_pick(rng, SEASONS), _pick(rng, GENRES), _pick(rng, KINDS)]
    if rng.random() < 0.2:
        parts.append(str(int(rng.integers(2019, 2027))))
    return " ".join(parts)


def _time_expr(rng) -> str:
    day = f"{_pick(rng, MONTHS)} {int(rng.integers(1, 29))}"
    hour = int(rng.integers(1, 13))
    clock = f"{hour}:{_pick(rng, ['00', '30', '15', '45'])} {_pick(rng, ['PM', 'AM'])}"
    style = int(rng.integers(4))
    if style == 0:
        return f"{_pick(rng, WEEKDAYS)}, {day} at {clock}"
    if style == 1:
        return f"{day}, {clock}"
    if style == 2:
        return f"{day} {hour} PM - {min(hour + 3, 12)} PM"
    return f"{_pick(rng, WEEKDAYS)} {day}"


def _venue(rng) -> str:
    v = f"{_pick(rng, VENUE_NAMES)} {_pick(rng, VENUE_KINDS)}"
    if rng.random() < 0.5:
        v += f", {_pick(rng, CITIES)}"
    return v


def _fill(rng, template: str, **kw) -> str:
    return template.format(
        genre=kw.get("genre", _pick(rng, GENRES)).lower(),
        big=f"{int(rng.integers(1, 50))},000",
        year=int(rng.integers(1980, 2015)),
        num=f"{int(rng.integers(1, 20))},{int(rng.integers(100, 999))}",
        slug=kw.get("slug", "events"),
        num4=f"{int(rng.integers(1000, 9999))}",
        org=_pick(rng, ORGANIZERS),
        **{k: v for k, v in kw.items() if k not in ("genre", "slug")},
    )


def _event_blocks(rng, cfg: GeneratorConfig) -> list[_Block]:
    title = _event_title(rng)
    genre = title.split()[1]
    headline = float(rng.uniform(28, 40))
    body = float(rng.uniform(14, 18))

    head: list[_Block] = []
    if rng.random() < 0.5:
        head.append(_Block([(f"{_pick(rng, ['Presented by', 'Hosted by'])} {_pick(rng, ORGANIZERS)}", None)], body))

    title_block = _Block([(title, "title")], headline, centered=True)

    details: list[_Block] = []
    when = _time_expr(rng)
    prefix = _pick(rng, ["", "", "When:", "Date:"])
    details.append(_Block(([(prefix, None)] if prefix else []) + [(when, "time")], body * 1.2))
    where = _venue(rng)
    prefix = _pick(rng, ["", "", "Where:", "Location:", "@"])
    details.append(_Block(([(prefix, None)] if prefix else []) + [(where, "location")], body * 1.2))
    if rng.random() < 0.5:
        details.reverse()
    if rng.random() < 0.9:
        amount = _price(rng, 5, 80)
        style = int(rng.integers(4))
        if style == 0:
            segs = [("Tickets:", None), (amount, "price")]
        elif style == 1:
            segs = [("Admission", None), (amount, "price")]
        elif style == 2:
            segs = [(amount, "price"), ("at the door", None)]
        else:
            segs = [("Entry fee", None), (amount, "price"), ("per person", None)]
        details.append(_Block(segs, body * 1.1))

    desc = []
    for _ in range(int(rng.integers(1, 4))):
        sents = [_fill(rng, _pick(rng, EVENT_FILLER), genre=genre) for _ in range(int(rng.integers(1, 3)))]
        desc.append(_Block([(". ".join(sents) + ".", None)], body))

    slug = genre.lower().replace(" ", "") + _pick(rng, KINDS).lower()
    footer = [_Block([(_fill(rng, _pick(rng, FOOTERS), slug=slug), None)], body * 0.9)]

    promo: list[_Block] = []
    if rng.random() < cfg.distractor_rate:
        other = _event_title(rng)
        while other == title:
            other = _event_title(rng)
        promo = [
            _Block([(other, None)], float(rng.uniform(28, 40)), centered=True),
            _Block([(_pick(rng, PROMO_CUES), None)], body * 1.2),
        ]

    main = [title_block, *details, *desc]
    if promo and rng.random() < 0.5:
        return head + promo + main + footer
    return head + main + promo + footer


def _product_entry(rng, font_name, font_price, gold: bool, name: str) -> list[_Block]:
    amount = _price(rng, 8, 400)
    price_segs = [(amount, "price" if gold else None)]
    style = int(rng.integers(3))
    if style == 1:
        price_segs = [("Price:", None)] + price_segs
    elif style == 2:
        price_segs = [("Now", None)] + price_segs + [(f"was {_price(rng, 400, 600)}", None)]
    rating = f"{rng.uniform(3, 5):.1f} out of 5 stars ({int(rng.integers(3, 5000))} reviews)"
    return [
        _Block([(name, "title" if gold else None)], font_name, splittable=gold),
        _Block([(rating, None)], font_price * 0.6),
        _Block(price_segs, font_price),
        _Block([(_pick(rng, ["Add to Cart", "Buy Now", "In stock", "Only 3 left"]), None)], font_price * 0.7),
    ]


def _product_name(rng) -> tuple[str, dict]:
    parts = dict(brand=_pick(rng, BRANDS), adj=_pick(rng, PROD_ADJ), material=_pick(rng, MATERIALS),
                 noun=_pick(rng, NOUNS))
    return f"{parts['brand']} {parts['adj']} {parts['material']} {parts['noun']}", parts


def _related_entries(rng, parts, body) -> list[_Block]:
    out = []
    for _ in range(int(rng.integers(1, 3))):
        other, oparts = _product_name(rng)
        if rng.random() < 0.5:  # related items often share the brand or noun
            other = f"{parts['brand']} {oparts['adj']} {oparts['material']} {parts['noun']}"
        out += _product_entry(rng, body * float(rng.uniform(1.05, 1.3)), body * 1.1, False, other)
    return out


def _product_blocks(rng, cfg: GeneratorConfig) -> list[_Block]:
    body = float(rng.uniform(13, 16))
    name, parts = _product_name(rng)
    blocks = [_Block([(_pick(rng, STORES), None)], body * 1.3)]
    if rng.random() < 0.7:
        cats = [_pick(rng, CATEGORIES) for _ in range(int(rng.integers(2, 4)))]
        blocks.append(_Block([(" > ".join(cats), None)], body * 0.9))
    if rng.random() < cfg.distractor_rate / 2:
        blocks.append(_Block([("Sponsored", None)], body * 0.9))
        blocks += _related_entries(rng, parts, body)[:4]
    blocks += _product_entry(rng, float(rng.uniform(24, 32)), float(rng.uniform(22, 28)), True, name)

    about = [_Block([("About this item", None)], body * 1.2)]
    for j in range(int(rng.integers(1, 4))):
        sents = [_fill(rng, _pick(rng, PROD_FILLER), name=name, city=_pick(rng, CITIES), **parts)
                 for _ in range(int(rng.integers(1, 3)))]
        if j == 0:  # the description always echoes the product's own wording at least once
            sents[0] = _fill(rng, _pick(rng, NAMED_FILLER), name=name, **parts)
        about.append(_Block([(". ".join(sents) + ".", None)], body))

    related: list[_Block] = []
    if rng.random() < cfg.distractor_rate:
        header = _pick(rng, ["Customers also viewed", "Related items", "You may also like"])
        related = [_Block([(header, None)], body * 1.2), *_related_entries(rng, parts, body)]
    if rng.random() < 0.5:
        blocks += about + related
    else:
        blocks += related + about
    blocks.append(_Block([(f"Sold by {_pick(rng, STORES)}. Free returns within 30 days.", None)], body * 0.9))
    return blocks


# ---------------------------------------------------------------------------
# Rendering to OCR-JSON


def _tokenize_block(block: _Block):
    text = " ".join(t for t, _ in block.segments if t)
    spans, n = [], 0
    for seg_text, label in block.segments:
        if not seg_text:
            continue
        k = len(tokenize(seg_text))
        if label is not None:
            spans.append((label, n, n + k))
        n += k
    return text, spans


def _split_points(text: str, spans) -> list[int]:
    """Token indices where a whitespace break falls outside every span."""
    toks = tokenize(text)
    out = []
    for p in range(1, len(toks)):
        prev = toks[p - 1]
        if toks[p].char_offset > prev.char_offset + len(prev.text) and not any(s < p < e for _, s, e in spans):
            out.append(p)
    return out


def _layout_piece(text: str, font: float, centered: bool):
    char_w = 0.52 * font
    usable = PAGE_WIDTH - 2 * MARGIN
    per_line = max(1, int(usable // char_w))
    lines = max(1, math.ceil(len(text) / per_line))
    width = min(usable, max(1, int(round(len(text) * char_w)))) if lines == 1 else usable
    height = max(1, int(round(lines * font * 1.25)))
    x = MARGIN + (usable - width) // 2 if centered else MARGIN
    return int(x), int(width), height


def render_document(doc_id: str, blocks: list[_Block], rng, cfg: GeneratorConfig) -> dict:
    pieces = []  # (text, font, centered, spans, attach_to_previous, word_fonts)
    for block in blocks:
        text, spans = _tokenize_block(block)
        nwords = len(text.split())
        word_fonts = [round(block.font * float(rng.normal(1.0, cfg.font_jitter)), 1) for _ in range(nwords)]
        points = _split_points(text, spans) if block.splittable else []
        if points and rng.random() < cfg.split_rate:
            p = points[int(rng.integers(len(points)))]
            toks = tokenize(text)
            cut = toks[p].char_offset
            left, right = text[:cut].rstrip(), text[cut:]
            nleft = len(left.split())
            pieces.append((left, block.font, block.centered,
                           [(l, s, e) for l, s, e in spans if e <= p], False, word_fonts[:nleft]))
            pieces.append((right, block.font, block.centered,
                           [(l, s - p, e - p) for l, s, e in spans if s >= p], True, word_fonts[nleft:]))
        else:
            pieces.append((text, block.font, block.centered, spans, False, word_fonts))

    geoms = [_layout_piece(t, f, c) for t, f, c, *_ in pieces]
    threshold = cfg.merge_alpha * statistics.median(h for _, _, h in geoms)
    y = int(rng.integers(24, 64))
    out_blocks, gold = [], []
    for i, ((text, font, _, spans, attached, word_fonts), (x, w, h)) in enumerate(zip(pieces, geoms)):
        if i:
            gap = int(rng.integers(0, 3)) if attached else int(math.ceil(threshold)) + 2 + int(rng.integers(0, 28))
            y += gap
        entry = {"text": text, "bbox": [x, y, w, h], "font_size": round(font, 1)}
        if len(set(word_fonts)) > 1 or word_fonts[0] != entry["font_size"]:
            entry["token_font_sizes"] = word_fonts
        out_blocks.append(entry)
        gold += [{"class": l, "block": i, "start": s, "end": e} for l, s, e in spans]
        y += h
    return {
        "doc_id": doc_id,
        "page_width": PAGE_WIDTH,
        "page_height": max(MIN_PAGE_HEIGHT, y + 48),
        "blocks": out_blocks,
        "gold_spans": gold,
    }


def generate_document_json(cfg: GeneratorConfig, index: int) -> dict:
    rng = np.random.default_rng([cfg.seed, index, 0 if cfg.domain == "event" else 1])
    blocks = _event_blocks(rng, cfg) if cfg.domain == "event" else _product_blocks(rng, cfg)
    return render_document(f"{cfg.domain}-{cfg.seed}-{index:05d}", blocks, rng, cfg)


def generate(config: GeneratorConfig) -> Corpus:
    """Deterministic annotated corpus, split 70/15/15 by a hash of each doc id."""
    corpus = Corpus(classes=DOMAIN_CLASSES[config.domain], domain=config.domain)
    for i in range(config.count):
        doc: VisualDocument = parse_document(generate_document_json(config, i))
        corpus.split(split_of(doc.doc_id)).append(doc)
    return corpus
