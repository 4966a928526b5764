import init, { Guide, rsa_keys, t_test } from "./pkg/cpg_wasm.js";

await init();

const $ = (id) => document.getElementById(id);
const guide = new Guide();

function render(snapshot) {
  const bar = $("bar");
  bar.querySelectorAll(".marker").forEach((m) => m.remove());
  const goal = $("goal");
  for (const marker of snapshot.progress.markers) {
    const el = document.createElement("span");
    el.className = "marker" + (snapshot.newlyCompleted.includes(marker.step) ? " active" : "");
    el.textContent = marker.label;
    bar.insertBefore(el, goal);
  }
  goal.classList.toggle("active", snapshot.progress.goal.active);
  $("guide-status").textContent = snapshot.relevant ? "" : "not related to the task";
  if (snapshot.modal === "prompting") $("modal").showModal();
}

function show(out, fn) {
  try {
    out.classList.remove("error");
    out.textContent = JSON.stringify(JSON.parse(fn()), null, 2);
  } catch (e) {
    out.classList.add("error");
    out.textContent = e.message ?? String(e);
  }
}

render(JSON.parse(guide.state()));

$("submit").onclick = () => {
  try {
    render(JSON.parse(guide.submit($("question").value, $("answer").value)));
  } catch (e) {
    $("guide-status").textContent = e.message ?? String(e);
  }
};

$("modal").querySelectorAll("button").forEach((b) => {
  b.onclick = () => {
    render(JSON.parse(guide.respond(b.dataset.choice)));
    $("modal").close();
    if (b.dataset.choice === "exit") $("submit").disabled = true;
  };
});

$("keys").onclick = () =>
  show($("keys-out"), () =>
    rsa_keys(BigInt($("p").value), BigInt($("q").value), BigInt($("e").value), $("message").value));

$("ttest").onclick = () =>
  show($("ttest-out"), () => t_test($("a").value, $("b").value, $("paired").checked));
