//! Class labels for the browser scenarios: 30 popular sites followed by 10
//! whistleblowing portals.

pub const WEBSITES: [&str; 40] = [
    "Netflix.com",
    "Amazon.com",
    "Facebook.com",
    "Google.com",
    "Yahoo.com",
    "Youtube.com",
    "Wikipedia.org",
    "Reddit.com",
    "Twitter.com",
    "Ebay.com",
    "Linkedin.com",
    "Diply.com",
    "Instagram.com",
    "Live.com",
    "Bing.com",
    "Imgur.com",
    "Ntd.tv",
    "Cnn.com",
    "Pinterest.com",
    "Tumblr.com",
    "Office.com",
    "Microsoftonline.com",
    "Chase.com",
    "Nytimes.com",
    "Blogspot.com",
    "Paypal.com",
    "Imdb.com",
    "Wordpress.com",
    "Espn.com",
    "Wikia.com",
    "Wikileaks.org",
    "Aljazeera.com/investigations",
    "Balkanleaks.eu",
    "Unileaks.org",
    "Globaleaks.com",
    "Liveleak.com",
    "Globalwitness.org",
    "Wikispooks.com",
    "Officeleaks.com",
    "Publeaks.nl",
];

/// Label for class `index`: a website name while they last, then `site-<n>`.
pub fn class_label(index: usize) -> String {
    WEBSITES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("site-{}", index + 1))
}
