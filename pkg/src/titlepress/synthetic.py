"""Template grammar for synthetic grocery titles with rule-derived short titles.

Long title:  brand + descriptors + [key modifier] + product noun + [with-phrase] + size + [count]
Short title: key modifier (if any) + product noun
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import RawTitlePair

# category -> (product nouns, descriptors, key modifiers, size units)
CATEGORIES: dict[str, tuple[list[str], list[str], list[str], list[str]]] = {
    "dairy": (
        ["yogurt", "milk", "cheese", "butter", "sour cream", "cottage cheese", "cream cheese",
         "string cheese", "half and half", "whipped cream", "kefir", "ghee"],
        ["strawberry", "vanilla", "blueberry", "plain", "peach", "cherry", "honey", "mild",
         "sharp", "shredded", "sliced", "whole", "salted", "unsalted", "creamy", "organic"],
        ["greek", "nonfat", "lowfat", "skim", "cheddar", "mozzarella", "swiss", "almond"],
        ["oz", "fl oz", "gal", "lb", "ct"],
    ),
    "produce": (
        ["green beans", "potatoes", "carrots", "apples", "bananas", "grapes", "spinach",
         "tomatoes", "onions", "avocados", "lemons", "broccoli", "cucumbers", "peppers"],
        ["fresh", "organic", "cut", "baby", "sweet", "seedless", "washed", "whole", "petite",
         "crisp", "ripe", "farm", "premium", "select"],
        ["red", "yellow", "gala", "russet", "roma", "green"],
        ["lb", "oz", "ct", "bag"],
    ),
    "bakery": (
        ["fruit cake", "bread", "bagels", "muffins", "croissants", "tortillas", "donuts",
         "cookies", "rolls", "pound cake", "pita", "brownies", "english muffins"],
        ["sliced", "soft", "fresh", "baked", "mini", "classic", "original", "golden",
         "homestyle", "chewy", "frosted", "glazed", "large"],
        ["wheat", "sourdough", "chocolate", "cinnamon", "rye", "gluten free"],
        ["oz", "ct", "lb"],
    ),
    "household": (
        ["trash bags", "paper towels", "dish soap", "laundry detergent", "sponges",
         "aluminum foil", "napkins", "bleach", "air freshener", "dryer sheets", "plastic wrap"],
        ["tall", "kitchen", "drawstring", "heavy duty", "ultra", "fresh", "clean", "scented",
         "lavender", "lemon", "mega", "extra strong", "select a size"],
        ["unscented", "liquid", "odor control", "recycled"],
        ["ct", "gallon", "fl oz", "sq ft", "rolls"],
    ),
    "personal": (
        ["shampoo", "conditioner", "body wash", "toothpaste", "deodorant", "lotion",
         "shower liner", "diaper bag", "razors", "mouthwash", "hand soap", "face wash"],
        ["moisturizing", "hydrating", "professional", "daily", "gentle", "fresh", "mint",
         "coconut", "shea butter", "almond", "cool", "sensitive", "salon"],
        ["dandruff", "whitening", "antibacterial", "clinical"],
        ["fl oz", "oz", "ct", "each"],
    ),
    "pantry": (
        ["pasta", "rice", "cereal", "peanut butter", "olive oil", "soup", "crackers",
         "granola bars", "coffee", "tea", "salsa", "pancake mix", "oatmeal", "honey"],
        ["classic", "original", "crunchy", "smooth", "toasted", "instant", "roasted", "spicy",
         "mild", "family size", "value", "hearty", "extra virgin"],
        ["brown", "decaf", "whole grain", "chicken noodle", "jasmine", "medium roast"],
        ["oz", "lb", "ct", "fl oz", "pack"],
    ),
}

WITH_PHRASES = [
    "with ham style flavor", "with sea salt", "with real fruit", "with vitamin d",
    "with pump", "with aloe", "with fluoride", "with no added sugar", "packaging may vary",
]

_SYLLABLES = ["ka", "zo", "ri", "mu", "bel", "tor", "vex", "lin", "pra", "do", "sun", "qui", "nor", "fa"]


def _brand_pool(rng: np.random.Generator, size: int) -> list[str]:
    real = ["great value", "del monte", "freshness guaranteed", "glad", "suave", "mainstays",
            "marketside", "equate", "parent's choice", "ogx", "kellogg's", "quaker"]
    made = set()
    while len(made) < size - len(real):
        n_syl = rng.integers(2, 4)
        word = "".join(rng.choice(_SYLLABLES, n_syl))
        made.add(word if rng.random() < 0.7 else word + " " + str(rng.choice(["farms", "kitchen", "naturals", "co"])))
    return real + sorted(made)


@dataclass
class SyntheticCorpus:
    pairs: list[RawTitlePair]

    @property
    def titles(self) -> list[str]:
        return [p.long_title for p in self.pairs]


def generate(n: int, seed: int = 0, num_brands: int = 80) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    brands = _brand_pool(rng, num_brands)
    cat_names = sorted(CATEGORIES)
    # each brand sells in one or two categories
    brand_cats = {b: set(rng.choice(cat_names, size=rng.integers(1, 3), replace=False)) for b in brands}
    pairs = []
    for _ in range(n):
        brand = brands[rng.integers(len(brands))]
        cat = sorted(brand_cats[brand])[rng.integers(len(brand_cats[brand]))]
        nouns, descs, keys, units = CATEGORIES[cat]
        noun = nouns[rng.integers(len(nouns))]
        n_desc = rng.integers(0, 4)
        chosen = [descs[i] for i in sorted(rng.choice(len(descs), n_desc, replace=False))]
        key = keys[rng.integers(len(keys))] if rng.random() < 0.45 else None
        parts = [brand, *chosen]
        if key:
            parts.append(key)
        parts.append(noun)
        if rng.random() < 0.25:
            parts.append(WITH_PHRASES[rng.integers(len(WITH_PHRASES))])
        size = f"{rng.integers(1, 64)}" if rng.random() < 0.6 else f"{rng.integers(1, 40)}.{rng.integers(1, 10)}"
        long = " ".join(parts) + f", {size} {units[rng.integers(len(units))]}"
        if rng.random() < 0.35:
            long += f", {rng.integers(2, 25)} count"
        # surface variation the normalizer must undo
        if rng.random() < 0.5:
            long = long.title()
        long = long.replace(" and ", " & ") if rng.random() < 0.3 else long
        short = f"{key} {noun}" if key else noun
        pairs.append(RawTitlePair(long, short))
    return SyntheticCorpus(pairs)
